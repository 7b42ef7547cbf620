// Command-line surface for the style-transfer workbench: corpus synthesis and
// preparation, tf-idf retrieval, DAE pretraining, the four training regimes,
// transfer inference, evaluation and gradient checking. One config file
// drives every stage; --set overrides individual keys.
//
// exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cpls/config.hpp"
#include "cpls/corpus.hpp"
#include "cpls/error.hpp"
#include "cpls/eval.hpp"
#include "cpls/nn.hpp"
#include "cpls/retrieval.hpp"
#include "cpls/training.hpp"

namespace fs = std::filesystem;
using namespace cpls;
using corpus::IdSeq;
using corpus::RawParallel;
using corpus::RawPool;
using corpus::TokenMode;
using corpus::TokenSeq;
using corpus::Vocabulary;

namespace {

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;

  Config load() const {
    Config cfg = config_path.empty() ? Config() : Config::from_file(config_path);
    cfg.apply_overrides(overrides);
    return cfg;
  }
};

TokenMode mode_a(const Config& cfg) {
  return corpus::token_mode_from_string(cfg.get_str("token_mode_a", "word"));
}
TokenMode mode_b(const Config& cfg) {
  return corpus::token_mode_from_string(cfg.get_str("token_mode_b", "word"));
}

std::string out_dir(const Config& cfg) {
  const std::string dir = cfg.get_str("out_dir", "out");
  fs::create_directories(dir);
  return dir;
}

std::string require(const Config& cfg, const std::string& key) {
  if (!cfg.has(key))
    throw DataError("config key '" + key + "' is required for this command");
  return cfg.get_str(key, "");
}

Vocabulary load_vocab(const Config& cfg) {
  return Vocabulary::load(require(cfg, "vocab"));
}

struct LoadedData {
  std::vector<std::pair<IdSeq, IdSeq>> parallel, valid, test;
  std::vector<IdSeq> pool_a, pool_b;
};

std::vector<std::pair<IdSeq, IdSeq>> encode_pairs(const RawParallel& raw,
                                                  const Vocabulary& vocab) {
  std::vector<std::pair<IdSeq, IdSeq>> out;
  out.reserve(raw.pairs.size());
  for (const auto& [a, b] : raw.pairs)
    out.emplace_back(vocab.encode(a), vocab.encode(b));
  return out;
}

std::vector<IdSeq> encode_pool(const RawPool& raw, const Vocabulary& vocab) {
  std::vector<IdSeq> out;
  out.reserve(raw.sentences.size());
  for (const auto& s : raw.sentences) out.push_back(vocab.encode(s));
  return out;
}

LoadedData load_data(const Config& cfg, const Vocabulary& vocab, bool need_parallel,
                     bool need_pools) {
  LoadedData data;
  const TokenMode ma = mode_a(cfg), mb = mode_b(cfg);
  if (need_parallel) {
    data.parallel =
        encode_pairs(corpus::load_parallel(require(cfg, "parallel_train"), ma, mb), vocab);
    if (cfg.has("parallel_valid"))
      data.valid = encode_pairs(
          corpus::load_parallel(cfg.get_str("parallel_valid", ""), ma, mb), vocab);
    if (cfg.has("parallel_test"))
      data.test = encode_pairs(
          corpus::load_parallel(cfg.get_str("parallel_test", ""), ma, mb), vocab);
  }
  if (need_pools) {
    data.pool_a = encode_pool(corpus::load_pool(require(cfg, "nonpar_a"), ma), vocab);
    data.pool_b = encode_pool(corpus::load_pool(require(cfg, "nonpar_b"), mb), vocab);
  }
  return data;
}

// ------------------------------------------------------------- subcommands

int cmd_synth(const CliState& cli) {
  const Config cfg = cli.load();
  corpus::SynthConfig sc;
  sc.n_parallel = static_cast<int>(cfg.get_int("synth_parallel", sc.n_parallel));
  sc.n_valid = static_cast<int>(cfg.get_int("synth_valid", sc.n_valid));
  sc.n_test = static_cast<int>(cfg.get_int("synth_test", sc.n_test));
  sc.n_nonparallel = static_cast<int>(cfg.get_int("synth_nonparallel", sc.n_nonparallel));
  sc.n_adj = static_cast<int>(cfg.get_int("synth_adj", sc.n_adj));
  sc.n_noun = static_cast<int>(cfg.get_int("synth_noun", sc.n_noun));
  sc.n_verb = static_cast<int>(cfg.get_int("synth_verb", sc.n_verb));
  sc.n_adv = static_cast<int>(cfg.get_int("synth_adv", sc.n_adv));
  sc.p_coord = cfg.get_double("synth_p_coord", sc.p_coord);
  sc.zipf = cfg.get_bool("synth_zipf", sc.zipf);
  sc.seed = static_cast<uint64_t>(cfg.get_int("seed", 1));

  const corpus::SynthData data = corpus::synth_styles(sc);
  const std::string dir = out_dir(cfg);
  const TokenMode w = TokenMode::Word;
  corpus::save_parallel(data.train, w, w, dir + "/parallel.train");
  corpus::save_parallel(data.valid, w, w, dir + "/parallel.valid");
  corpus::save_parallel(data.test, w, w, dir + "/parallel.test");
  corpus::save_pool(data.pool_a, w, dir + "/nonpar_a.train");
  corpus::save_pool(data.pool_b, w, dir + "/nonpar_b.train");
  corpus::save_pool(data.pool_a_valid, w, dir + "/nonpar_a.valid");
  corpus::save_pool(data.pool_b_valid, w, dir + "/nonpar_b.valid");
  std::cout << "synth: wrote " << data.train.pairs.size() << " train / "
            << data.valid.pairs.size() << " valid / " << data.test.pairs.size()
            << " test pairs and 2x" << data.pool_a.sentences.size()
            << " nonparallel sentences to " << dir << "\n";
  return 0;
}

int cmd_prepare(const CliState& cli) {
  const Config cfg = cli.load();
  const TokenMode ma = mode_a(cfg), mb = mode_b(cfg);
  const int min_a = static_cast<int>(cfg.get_int("min_len_a", 1));
  const int max_a = static_cast<int>(cfg.get_int("max_len_a", 1000));
  const int min_b = static_cast<int>(cfg.get_int("min_len_b", 1));
  const int max_b = static_cast<int>(cfg.get_int("max_len_b", 1000));
  const int min_freq = static_cast<int>(cfg.get_int("min_freq", 1));

  RawParallel par = corpus::load_parallel(require(cfg, "parallel_train"), ma, mb);
  const size_t before = par.pairs.size();
  par = corpus::length_filter(par, min_a, max_a, min_b, max_b);
  RawPool pool_a = corpus::length_filter(
      corpus::load_pool(require(cfg, "nonpar_a"), ma), min_a, max_a);
  RawPool pool_b = corpus::length_filter(
      corpus::load_pool(require(cfg, "nonpar_b"), mb), min_b, max_b);

  std::vector<TokenSeq> par_a, par_b;
  for (const auto& [a, b] : par.pairs) {
    par_a.push_back(a);
    par_b.push_back(b);
  }
  const Vocabulary vocab = Vocabulary::build(
      {&par_a, &par_b, &pool_a.sentences, &pool_b.sentences}, min_freq);

  const std::string dir = out_dir(cfg);
  const std::string vocab_path = cfg.get_str("vocab", dir + "/vocab.txt");
  vocab.save(vocab_path);

  corpus::EncodeStats stats;
  corpus::encode_parallel(par, vocab, "train", &stats);
  corpus::encode_pool(pool_a, vocab, "a", &stats);
  corpus::encode_pool(pool_b, vocab, "b", &stats);

  std::cout << "prepare: vocab size " << vocab.size() << ", kept " << par.pairs.size()
            << "/" << before << " parallel pairs, pools " << pool_a.sentences.size()
            << "/" << pool_b.sentences.size() << ", unknown rate "
            << stats.unknown_rate() << "\n";
  if (stats.unknown_rate() > 0.05)
    std::cerr << "prepare: warning: unknown-token rate above 5%; style-classifier "
                 "evaluation is unreliable on such data\n";
  std::cout << "prepare: wrote " << vocab_path << "\n";
  return 0;
}

int cmd_index(const CliState& cli, const std::string& corpus_path,
              const std::string& style, const std::string& out_path) {
  const Config cfg = cli.load();
  const TokenMode mode = style == "b" ? mode_b(cfg) : mode_a(cfg);
  const RawPool pool = corpus::load_pool(corpus_path, mode);
  const auto index = retrieval::TfIdfIndex::build(
      pool.sentences, cfg.get_bool("idf_smooth", false));
  index.save(out_path);
  std::cout << "index: " << index.n_docs() << " documents -> " << out_path << "\n";
  return 0;
}

int cmd_pseudo(const CliState& cli) {
  const Config cfg = cli.load();
  const TokenMode ma = mode_a(cfg), mb = mode_b(cfg);
  const RawPool pool_a = corpus::load_pool(require(cfg, "nonpar_a"), ma);
  const RawPool pool_b = corpus::load_pool(require(cfg, "nonpar_b"), mb);
  const bool smooth = cfg.get_bool("idf_smooth", false);
  const auto index_a = retrieval::TfIdfIndex::build(pool_a.sentences, smooth);
  const auto index_b = retrieval::TfIdfIndex::build(pool_b.sentences, smooth);

  const size_t per_side = static_cast<size_t>(cfg.get_int(
      "pseudo_queries_per_side",
      static_cast<long long>(std::min(pool_a.sentences.size(), pool_b.sentences.size()))));
  Rng rng(static_cast<uint64_t>(cfg.get_int("seed", 1)) ^ 0x95eed0);
  const auto pseudo = retrieval::build_pseudo_parallel(
      index_a, index_b, pool_a.sentences, pool_b.sentences, per_side, rng);

  const std::string dir = out_dir(cfg);
  const std::string path = cfg.get_str("pseudo_parallel", dir + "/pseudo.tsv");
  corpus::save_parallel(pseudo.pairs, ma, mb, path, &pseudo.scores);
  std::cout << "pseudo: " << pseudo.pairs.pairs.size() << " pairs ("
            << pseudo.dropped_no_hit << " queries without hit, "
            << pseudo.dropped_dupes << " duplicates dropped) -> " << path << "\n";
  return 0;
}

int cmd_pretrain_dae(const CliState& cli, const std::string& style) {
  const Config cfg = cli.load();
  const Vocabulary vocab = load_vocab(cfg);
  const auto tc = training::TrainingConfig::from_config(cfg);
  const LoadedData data = load_data(cfg, vocab, false, true);
  const std::string dir = out_dir(cfg);

  training::ModelBundle bundle(tc, vocab.size());
  training::StepLog log(dir + "/dae_steps.csv");
  long step = 0;
  training::StepHooks hooks{&log, &step};
  std::vector<std::string> styles =
      style == "both" ? std::vector<std::string>{"a", "b"}
                      : std::vector<std::string>{style};
  for (const auto& s : styles)
    training::pretrain_dae(bundle, s, s == "a" ? data.pool_a : data.pool_b, tc, hooks);

  const std::string ckpt = dir + "/dae.ckpt";
  Config echo = cfg;
  tc.echo_into(echo);
  training::save_checkpoint(bundle.store, ckpt, {step, echo.hash(), std::nullopt});
  training::TrainResult result;
  result.best_checkpoint = ckpt;
  result.steps = step;
  training::write_run_manifest(dir + "/dae_manifest.json", echo, result, {});
  std::cout << "pretrain-dae: " << step << " steps -> " << ckpt << "\n";
  return 0;
}

int cmd_train(const CliState& cli, const std::string& model) {
  const Config cfg = cli.load();
  const Vocabulary vocab = load_vocab(cfg);
  const auto tc = training::TrainingConfig::from_config(cfg);
  const std::string dir = out_dir(cfg);
  Config echo = cfg;
  tc.echo_into(echo);

  const bool needs_pools = model == "cpls" || model == "sls";
  const LoadedData data = load_data(cfg, vocab, true, needs_pools);

  training::StepLog log(dir + "/" + model + "_steps.csv");
  long step = 0;
  training::StepHooks hooks{&log, &step};
  training::TrainResult result;
  std::vector<std::pair<std::string, double>> metrics;

  if (model == "cpls" || model == "sls") {
    training::ModelBundle bundle(tc, vocab.size());
    if (cfg.has("init_checkpoint")) bundle.store.load(cfg.get_str("init_checkpoint", ""));
    if (model == "cpls") {
      if (!cfg.get_bool("skip_dae_pretrain", cfg.has("init_checkpoint"))) {
        training::pretrain_dae(bundle, "a", data.pool_a, tc, hooks);
        training::pretrain_dae(bundle, "b", data.pool_b, tc, hooks);
      }
      result = training::train_cpls(bundle, data.parallel, data.pool_a, data.pool_b,
                                    data.valid, tc, dir, hooks);
    } else {
      result = training::train_sls(bundle, data.parallel, data.pool_a, data.pool_b,
                                   data.valid, tc, dir, hooks);
    }
  } else if (model == "s2s" || model == "dar") {
    ParamStore store;
    Rng rng(tc.seed);
    nn::AttentionS2S s2s(store, "s2s", vocab.size(), tc.embed_dim, tc.hidden, rng);
    if (model == "s2s") {
      result = training::train_s2s(s2s, store, data.parallel, data.valid, tc, dir, hooks);
    } else {
      const RawParallel pseudo_raw = corpus::load_parallel(
          require(cfg, "pseudo_parallel"), mode_a(cfg), mode_b(cfg));
      const auto pseudo = encode_pairs(pseudo_raw, vocab);
      result = training::train_dar(s2s, store, pseudo, data.parallel, data.valid, tc,
                                   dir, hooks);
    }
  } else {
    throw DataError("unknown model '" + model + "' (expected cpls|sls|dar|s2s)");
  }

  metrics.emplace_back("best_val_bleu", result.best_bleu);
  training::write_run_manifest(dir + "/" + model + "_manifest.json", echo, result,
                               metrics);
  std::cout << "train " << model << ": " << result.steps << " steps, best validation "
            << "BLEU " << result.best_bleu << "\n"
            << "best checkpoint: " << result.best_checkpoint << "\n";
  return 0;
}

int cmd_transfer(const CliState& cli, const std::string& model,
                 const std::string& direction, const std::string& input_path,
                 const std::string& output_path, const std::string& checkpoint) {
  const Config cfg = cli.load();
  const Vocabulary vocab = load_vocab(cfg);
  const auto tc = training::TrainingConfig::from_config(cfg);
  if (!fs::exists(checkpoint))
    throw DataError("checkpoint not found: " + checkpoint);

  const bool a2b = direction == "a2b";
  const TokenMode src_mode = a2b ? mode_a(cfg) : mode_b(cfg);
  const TokenMode tgt_mode = a2b ? mode_b(cfg) : mode_a(cfg);
  const RawPool input = corpus::load_pool(input_path, src_mode);

  size_t unk = 0, tokens = 0;
  std::vector<IdSeq> encoded;
  for (const auto& s : input.sentences) {
    tokens += s.size();
    encoded.push_back(vocab.encode(s, &unk));
  }

  std::vector<IdSeq> outputs(encoded.size());
  if (model == "cpls" || model == "sls") {
    training::ModelBundle bundle(tc, vocab.size());
    bundle.store.load(checkpoint);
    const bool sls_path = model == "sls";
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(encoded.size()); ++i)
      outputs[i] =
          bundle.transfer(encoded[i], direction, tc.beam, tc.max_decode_len, sls_path);
  } else {
    ParamStore store;
    Rng rng(tc.seed);
    nn::AttentionS2S s2s(store, "s2s", vocab.size(), tc.embed_dim, tc.hidden, rng);
    store.load(checkpoint);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(encoded.size()); ++i)
      outputs[i] = s2s.beam_decode(encoded[i], tc.beam, tc.max_decode_len);
  }

  RawPool out_pool;
  for (const auto& ids : outputs) out_pool.sentences.push_back(vocab.decode(ids));
  corpus::save_pool(out_pool, tgt_mode, output_path);
  std::cout << "transfer: " << outputs.size() << " sentences -> " << output_path
            << " (unknown tokens: " << unk << "/" << tokens << ")\n";
  return 0;
}

int cmd_evaluate(const CliState& cli, const std::string& model,
                 const std::string& checkpoint) {
  const Config cfg = cli.load();
  const Vocabulary vocab = load_vocab(cfg);
  const auto tc = training::TrainingConfig::from_config(cfg);
  const std::string dir = out_dir(cfg);
  const TokenMode ma = mode_a(cfg), mb = mode_b(cfg);

  const RawParallel test_raw =
      corpus::load_parallel(require(cfg, "parallel_test"), ma, mb);
  const RawPool pool_a = corpus::load_pool(require(cfg, "nonpar_a"), ma);
  const RawPool pool_b = corpus::load_pool(require(cfg, "nonpar_b"), mb);

  eval::ClassifierConfig cc;
  cc.embed_dim = static_cast<int>(cfg.get_int("clf_embed_dim", cc.embed_dim));
  cc.epochs = static_cast<int>(cfg.get_int("clf_epochs", cc.epochs));
  cc.seed = static_cast<uint64_t>(cfg.get_int("clf_seed", 7));
  eval::StyleClassifier clf(vocab, cc);
  clf.train(pool_a.sentences, pool_b.sentences);

  // model-backed transfer over raw token sequences
  std::optional<training::ModelBundle> bundle;
  std::optional<nn::AttentionS2S> s2s;
  ParamStore s2s_store;
  if (model == "cpls" || model == "sls") {
    bundle.emplace(tc, vocab.size());
    bundle->store.load(checkpoint);
  } else {
    Rng rng(tc.seed);
    s2s.emplace(s2s_store, "s2s", vocab.size(), tc.embed_dim, tc.hidden, rng);
    s2s_store.load(checkpoint);
  }
  auto make_transfer = [&](const std::string& direction) {
    return [&, direction](const TokenSeq& tokens) {
      const IdSeq ids = vocab.encode(tokens);
      IdSeq out;
      if (bundle)
        out = bundle->transfer(ids, direction, tc.beam, tc.max_decode_len,
                               model == "sls");
      else
        out = s2s->beam_decode(ids, tc.beam, tc.max_decode_len);
      return vocab.decode(out);
    };
  };

  std::vector<TokenSeq> src_a, src_b;
  for (const auto& [a, b] : test_raw.pairs) {
    src_a.push_back(a);
    src_b.push_back(b);
  }

  eval::EvalReport report;
  Config echo = cfg;
  tc.echo_into(echo);
  report.config_hash = echo.hash();
  report.directions.push_back(eval::evaluate_direction(
      make_transfer("a2b"), src_a, src_b, clf, 1, "a2b"));
  if (!(model == "s2s" || model == "dar"))  // attention baselines are one-way
    report.directions.push_back(eval::evaluate_direction(
        make_transfer("b2a"), src_b, src_a, clf, 0, "b2a"));

  const std::string path = cfg.get_str("report", dir + "/report.json");
  report.save_json(path);
  std::cout << report.console_table() << "report written to " << path << "\n";
  return 0;
}

int cmd_gradcheck(const CliState& cli, int trials) {
  (void)cli;
  auto cases = builtin_grad_checks();
  for (auto& extra : nn::model_grad_checks()) cases.push_back(extra);

  double worst = 0.0;
  std::string worst_name;
  std::printf("%-26s %14s\n", "operation", "max rel error");
  for (auto& c : cases) {
    double mx = 0.0;
    for (int s = 1; s <= trials; ++s) mx = std::max(mx, c.run(static_cast<uint64_t>(s)));
    std::printf("%-26s %14.3e\n", c.name.c_str(), mx);
    if (mx > worst) {
      worst = mx;
      worst_name = c.name;
    }
  }
  std::printf("worst: %s (%.3e), threshold 1e-4\n", worst_name.c_str(), worst);
  if (worst >= 1e-4) {
    std::cerr << "gradcheck: FAILED\n";
    return 3;
  }
  return 0;
}

int cmd_human_import(const std::string& path) {
  const auto means = eval::aggregate_human_scores(path);
  std::printf("%-12s %8s\n", "aspect", "mean");
  for (const auto& [aspect, mean] : means)
    std::printf("%-12s %8.4f\n", aspect.c_str(), mean);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised text style transfer via latent cross projection"};
  app.require_subcommand(1);

  CliState cli;
  app.add_option("--config", cli.config_path, "config file (key = value lines)");
  app.add_option("--set", cli.overrides, "override config keys, key=value");

  auto* synth = app.add_subcommand("synth", "generate the synthetic style corpora");
  auto* prepare = app.add_subcommand("prepare", "tokenize, filter and build the vocabulary");

  std::string index_corpus, index_style = "a", index_out;
  auto* index = app.add_subcommand("index", "build a tf-idf index for one corpus");
  index->add_option("--corpus", index_corpus, "corpus file, one sentence per line")
      ->required();
  index->add_option("--style", index_style, "style of the corpus (a|b)")
      ->check(CLI::IsMember({"a", "b"}));
  index->add_option("--out", index_out, "output index path")->required();

  auto* pseudo = app.add_subcommand("pseudo", "build the pseudo-parallel corpus by retrieval");

  std::string dae_style = "both";
  auto* pretrain = app.add_subcommand("pretrain-dae", "pretrain denoising autoencoders");
  pretrain->add_option("--style", dae_style, "a, b or both")
      ->check(CLI::IsMember({"a", "b", "both"}));

  std::string train_model;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--model", train_model, "cpls|sls|dar|s2s")
      ->required()
      ->check(CLI::IsMember({"cpls", "sls", "dar", "s2s"}));

  std::string tr_model = "cpls", tr_dir, tr_in, tr_out, tr_ckpt;
  auto* transfer = app.add_subcommand("transfer", "transfer sentences between styles");
  transfer->add_option("--model", tr_model, "cpls|sls|dar|s2s")
      ->check(CLI::IsMember({"cpls", "sls", "dar", "s2s"}));
  transfer->add_option("--direction", tr_dir, "a2b|b2a")
      ->required()
      ->check(CLI::IsMember({"a2b", "b2a"}));
  transfer->add_option("--input", tr_in, "input file, one sentence per line")->required();
  transfer->add_option("--output", tr_out, "output file")->required();
  transfer->add_option("--checkpoint", tr_ckpt, "trained checkpoint")->required();

  std::string ev_model = "cpls", ev_ckpt;
  auto* evaluate = app.add_subcommand("evaluate", "score a trained model on the test set");
  evaluate->add_option("--model", ev_model, "cpls|sls|dar|s2s")
      ->check(CLI::IsMember({"cpls", "sls", "dar", "s2s"}));
  evaluate->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();

  int gc_trials = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--trials", gc_trials, "seeded trials per operation");

  std::string human_path;
  auto* human = app.add_subcommand("human-import", "aggregate human scores (aspect,score csv)");
  human->add_option("--scores", human_path, "csv file")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1; --help exits 0
  }

  try {
    if (synth->parsed()) return cmd_synth(cli);
    if (prepare->parsed()) return cmd_prepare(cli);
    if (index->parsed()) return cmd_index(cli, index_corpus, index_style, index_out);
    if (pseudo->parsed()) return cmd_pseudo(cli);
    if (pretrain->parsed()) return cmd_pretrain_dae(cli, dae_style);
    if (train->parsed()) return cmd_train(cli, train_model);
    if (transfer->parsed())
      return cmd_transfer(cli, tr_model, tr_dir, tr_in, tr_out, tr_ckpt);
    if (evaluate->parsed()) return cmd_evaluate(cli, ev_model, ev_ckpt);
    if (gradcheck->parsed()) return cmd_gradcheck(cli, gc_trials);
    if (human->parsed()) return cmd_human_import(human_path);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
