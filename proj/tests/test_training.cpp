#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpls/training.hpp"

using namespace cpls;
using namespace cpls::training;
using corpus::IdSeq;

namespace {

namespace fs = std::filesystem;

TrainingConfig tiny_config(uint64_t seed = 1) {
  TrainingConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden = 8;
  cfg.dropout = 0.0;
  cfg.batch_size = 4;
  cfg.corruption_k = 2;
  cfg.seed = seed;
  cfg.beam = 2;
  cfg.max_decode_len = 12;
  return cfg;
}

std::vector<IdSeq> random_sentences(int n, int vocab, Rng& rng, int min_len = 3,
                                    int max_len = 7) {
  std::vector<IdSeq> out;
  for (int i = 0; i < n; ++i) {
    IdSeq s;
    const int len = min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    for (int t = 0; t < len; ++t)
      s.push_back(4 + static_cast<int>(rng.uniform_int(vocab - 4)));
    out.push_back(s);
  }
  return out;
}

std::vector<std::pair<IdSeq, IdSeq>> random_pairs(int n, int vocab, Rng& rng) {
  std::vector<std::pair<IdSeq, IdSeq>> out;
  auto a = random_sentences(n, vocab, rng);
  auto b = random_sentences(n, vocab, rng);
  for (int i = 0; i < n; ++i) out.emplace_back(a[i], b[i]);
  return out;
}

std::string temp_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("cpls_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::vector<std::string> log_phases(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::string> phases;
  while (std::getline(is, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    phases.push_back(line.substr(c1 + 1, c2 - c1 - 1));
  }
  return phases;
}

}  // namespace

TEST_CASE("loss composition: total equals alpha*l1 + beta*l2 exactly") {
  auto cfg = tiny_config(3);
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  ModelBundle bundle(cfg, 16);
  Rng rng(5), drop(6);
  const auto pairs = random_pairs(3, 16, rng);

  const auto sup = cpls_supervised_step(bundle, pairs, "a2b", drop, false);
  CHECK(sup.total == doctest::Approx(cfg.alpha * sup.l1 + cfg.beta * sup.l2).epsilon(1e-15));

  const auto sents = random_sentences(3, 16, rng);
  const auto cyc = cpls_cycle_step(bundle, sents, "b", drop, false);
  CHECK(cyc.total == doctest::Approx(cfg.alpha * cyc.l1 + cfg.beta * cyc.l2).epsilon(1e-15));
}

TEST_CASE("alpha zero reduces the supervised loss to pure NLL") {
  auto cfg = tiny_config(4);
  cfg.alpha = 0.0;
  ModelBundle bundle(cfg, 16);
  Rng rng(7), drop(8);
  const auto pairs = random_pairs(2, 16, rng);
  const auto parts = cpls_supervised_step(bundle, pairs, "a2b", drop, false);
  CHECK(parts.total == doctest::Approx(parts.l2).epsilon(1e-15));
}

TEST_CASE("supervised step on a fresh bundle decreases its own loss") {
  int failures = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    auto cfg = tiny_config(seed);
    cfg.lr_cpls = 0.01;
    cfg.clip = 0.0;
    ModelBundle bundle(cfg, 20);
    Rng rng(seed * 17), drop(seed * 31);
    const auto pairs = random_pairs(4, 20, rng);
    const double before = cpls_supervised_step(bundle, pairs, "a2b", drop, false).total;
    cpls_supervised_step(bundle, pairs, "a2b", drop, true);
    const double after = cpls_supervised_step(bundle, pairs, "a2b", drop, false).total;
    if (!(after < before)) ++failures;
  }
  CHECK(failures <= 2);
}

TEST_CASE("hand-set zero bundle: supervised loss matches direct arithmetic") {
  // zero encoder weights collapse both latents to zero; the projection and
  // decoder outputs then come only from hand-set biases
  auto cfg = tiny_config(9);
  cfg.hidden = 2;
  cfg.embed_dim = 3;
  cfg.alpha = 1.0;
  cfg.beta = 1.0;
  const int vocab = 6;
  ModelBundle bundle(cfg, vocab);
  for (auto& p : bundle.store.all())
    std::fill(p.value.data()->value.begin(), p.value.data()->value.end(), 0.0);

  // projection bias: c~_b = tanh(b1); encoder latents are zero
  bundle.f.b1.values() = {0.5, -0.25, 0.75, 0.0};
  // decoder output bias fixes every step's distribution
  bundle.dec_b.b_out.values() = {0.0, 0.0, 0.1, 0.4, 0.2, 0.9};

  const IdSeq a{4, 5};
  const IdSeq b{5, 3};  // loss over tokens {5, 3} plus the end marker 2
  const std::vector<std::pair<IdSeq, IdSeq>> pairs = {{a, b}};
  Rng drop(1);
  const auto parts = cpls_supervised_step(bundle, pairs, "a2b", drop, false);

  // l1 = || tanh(b1) - 0 ||
  double sq = 0.0;
  for (double v : bundle.f.b1.values()) sq += std::tanh(v) * std::tanh(v);
  const double l1 = std::sqrt(sq);
  CHECK(parts.l1 == doctest::Approx(l1).epsilon(1e-12));

  // decoder: zero weights keep h at zero for every step (gates 0.5, cand 0),
  // so logits = b_out at every position; targets are 5, 3, eos(2)
  const auto& bo = bundle.dec_b.b_out.values();
  double z = 0.0;
  for (double v : bo) z += std::exp(v);
  const double logz = std::log(z);
  const double l2 = -((bo[5] - logz) + (bo[3] - logz) + (bo[2] - logz)) / 3.0;
  CHECK(parts.l2 == doctest::Approx(l2).epsilon(1e-12));
  CHECK(parts.total == doctest::Approx(l1 + l2).epsilon(1e-12));
}

TEST_CASE("cycle with zeroed projections reduces the distance term to zero") {
  // zero weights make both projections map everything to tanh(0) = 0, and the
  // zero encoder emits zero latents: the cycled latent equals the reference
  auto cfg = tiny_config(10);
  cfg.hidden = 2;
  cfg.embed_dim = 3;
  ModelBundle bundle(cfg, 6);
  for (auto& p : bundle.store.all())
    std::fill(p.value.data()->value.begin(), p.value.data()->value.end(), 0.0);
  Rng drop(2);
  const std::vector<IdSeq> sents = {{4, 5}};
  const auto parts = cpls_cycle_step(bundle, sents, "a", drop, false);
  CHECK(parts.l1 == doctest::Approx(0.0).epsilon(1e-12));

  // and l2 equals the plain autoencoding loss through the same decoder path
  Graph g(false);
  std::vector<IdSeq> batch_sents = sents;
  auto enc_batch = corpus::make_batch(batch_sents, false);
  auto dec_batch = corpus::make_batch(batch_sents, true);
  Tensor c = bundle.enc_a.encode(g, bundle.emb_a, enc_batch, {});
  Tensor cycled = bundle.g.apply(g, bundle.f.apply(g, c));
  const double ae = bundle.dec_a.nll(g, bundle.emb_a, cycled, dec_batch, {}).loss.item();
  CHECK(parts.l2 == doctest::Approx(ae).epsilon(1e-12));
}

TEST_CASE("cycle pass never reaches the opposite style's decoder") {
  auto cfg = tiny_config(11);
  ModelBundle bundle(cfg, 16);
  Rng rng(3), drop(4);
  const auto sents = random_sentences(4, 16, rng);

  // run the cycle loss manually so gradients survive for inspection
  Graph g(true);
  auto enc_batch = corpus::make_batch(sents, false);
  auto dec_batch = corpus::make_batch(sents, true);
  Tensor c = bundle.enc_a.encode(g, bundle.emb_a, enc_batch, {});
  Tensor cycled = bundle.g.apply(g, bundle.f.apply(g, c));
  Tensor l1 = g.euclidean_rows_mean(cycled, g.detach(c));
  Tensor l2 = bundle.dec_a.nll(g, bundle.emb_a, cycled, dec_batch, {}).loss;
  g.backward(g.add(l1, l2));

  auto norm = [&](const std::string& prefix) {
    return bundle.store.grad_norm(
        [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
  };
  CHECK(norm("dec_b.") == 0.0);
  CHECK(norm("enc_b.") == 0.0);
  CHECK(norm("emb_b.") == 0.0);
  CHECK(norm("dec_a.") > 0.0);
  CHECK(norm("f.") > 0.0);
  CHECK(norm("g.") > 0.0);
}

TEST_CASE("schedule ratios: degenerate settings produce pure phases") {
  Rng rng(6);
  const int vocab = 16;
  const auto parallel = random_pairs(8, vocab, rng);
  const auto pool_a = random_sentences(8, vocab, rng);
  const auto pool_b = random_sentences(8, vocab, rng);
  const auto valid = random_pairs(2, vocab, rng);

  {
    auto cfg = tiny_config(12);
    cfg.sup_ratio = 1;
    cfg.cyc_ratio = 0;
    cfg.cpls_steps = 6;
    cfg.checkpoint_every = 6;
    const std::string dir = temp_dir("sched_sup");
    StepLog log(dir + "/steps.csv");
    long step = 0;
    ModelBundle bundle(cfg, vocab);
    train_cpls(bundle, parallel, pool_a, pool_b, valid, cfg, dir, {&log, &step});
    for (const auto& phase : log_phases(dir + "/steps.csv"))
      CHECK(phase.rfind("sup_", 0) == 0);
  }
  {
    auto cfg = tiny_config(13);
    cfg.sup_ratio = 0;
    cfg.cyc_ratio = 1;
    cfg.cpls_steps = 6;
    cfg.checkpoint_every = 6;
    const std::string dir = temp_dir("sched_cyc");
    StepLog log(dir + "/steps.csv");
    long step = 0;
    ModelBundle bundle(cfg, vocab);
    train_cpls(bundle, parallel, pool_a, pool_b, valid, cfg, dir, {&log, &step});
    for (const auto& phase : log_phases(dir + "/steps.csv"))
      CHECK(phase.rfind("cyc_", 0) == 0);
  }
}

TEST_CASE("empty parallel set falls back to cycle-only training") {
  Rng rng(7);
  const int vocab = 16;
  const auto pool_a = random_sentences(8, vocab, rng);
  const auto pool_b = random_sentences(8, vocab, rng);
  auto cfg = tiny_config(14);
  cfg.cpls_steps = 4;
  cfg.checkpoint_every = 4;
  const std::string dir = temp_dir("cyc_fallback");
  StepLog log(dir + "/steps.csv");
  long step = 0;
  ModelBundle bundle(cfg, vocab);
  train_cpls(bundle, {}, pool_a, pool_b, {}, cfg, dir, {&log, &step});
  const auto phases = log_phases(dir + "/steps.csv");
  REQUIRE(!phases.empty());
  for (const auto& phase : phases) CHECK(phase.rfind("cyc_", 0) == 0);
}

TEST_CASE("sls without parallel data degenerates to two independent DAEs") {
  Rng rng(8);
  const int vocab = 16;
  const auto pool_a = random_sentences(8, vocab, rng);
  const auto pool_b = random_sentences(8, vocab, rng);
  auto cfg = tiny_config(15);
  cfg.sls_rounds = 2;
  cfg.sls_dae_per_round = 3;
  cfg.checkpoint_every = 100;
  const std::string dir = temp_dir("sls_nopar");
  StepLog log(dir + "/steps.csv");
  long step = 0;
  ModelBundle bundle(cfg, vocab);
  train_sls(bundle, {}, pool_a, pool_b, {}, cfg, dir, {&log, &step});
  for (const auto& phase : log_phases(dir + "/steps.csv"))
    CHECK(phase.rfind("dae_", 0) == 0);
}

TEST_CASE("sls cross-linked step loss equals nll through the shared latent") {
  auto cfg = tiny_config(16);
  ModelBundle bundle(cfg, 16);
  Rng rng(9), drop(10);
  const auto pairs = random_pairs(3, 16, rng);

  // manual loss with the same dropout-off path
  Graph g(false);
  std::vector<IdSeq> src, tgt;
  for (const auto& [a, b] : pairs) {
    src.push_back(a);
    tgt.push_back(b);
  }
  Tensor latent = bundle.enc_a.encode(g, bundle.emb_a, corpus::make_batch(src, false), {});
  const double manual =
      bundle.dec_b.nll(g, bundle.emb_b, latent, corpus::make_batch(tgt, true), {}).loss.item();

  // sls_s2s_step applies dropout in train mode; with rate 0 paths agree
  ModelBundle fresh(cfg, 16);
  const double stepped = sls_s2s_step(fresh, pairs, "a2b", drop);
  CHECK(stepped == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("sls audit: exact 20-dae-then-one-s2s alternation in optimizer steps") {
  Rng rng(10);
  const int vocab = 16;
  const auto parallel = random_pairs(6, vocab, rng);
  const auto pool_a = random_sentences(8, vocab, rng);
  const auto pool_b = random_sentences(8, vocab, rng);
  auto cfg = tiny_config(17);
  cfg.sls_rounds = 3;
  cfg.sls_dae_per_round = 20;
  cfg.checkpoint_every = 1000;
  const std::string dir = temp_dir("sls_audit");
  StepLog log(dir + "/steps.csv");
  long step = 0;
  ModelBundle bundle(cfg, vocab);
  train_sls(bundle, parallel, pool_a, pool_b, {}, cfg, dir, {&log, &step});

  const auto phases = log_phases(dir + "/steps.csv");
  REQUIRE(phases.size() == 3 * (20 * 2 + 1));
  size_t i = 0;
  for (int round = 0; round < 3; ++round) {
    for (int k = 0; k < 20; ++k) {
      CHECK(phases[i++] == "dae_a");
      CHECK(phases[i++] == "dae_b");
    }
    CHECK(phases[i++] == (round % 2 == 0 ? "s2s_a2b" : "s2s_b2a"));
  }
}

TEST_CASE("dar selects the argmax-bleu checkpoint, earliest on ties") {
  Rng rng(11);
  const int vocab = 16;
  const auto pseudo = random_pairs(10, vocab, rng);
  const auto parallel = random_pairs(6, vocab, rng);
  const auto valid = random_pairs(3, vocab, rng);

  // phase 1 alone first: its checkpoint selection is argmax with earliest tie
  auto cfg = tiny_config(18);
  cfg.dar_phase1_steps = 6;
  cfg.dar_phase2_steps = 0;
  cfg.checkpoint_every = 2;
  cfg.patience = 100;
  {
    const std::string dir = temp_dir("dar_p1only");
    StepLog log(dir + "/steps.csv");
    long step = 0;
    ParamStore store;
    Rng init(cfg.seed);
    nn::AttentionS2S s2s(store, "s2s", vocab, cfg.embed_dim, cfg.hidden, init);
    const auto result =
        train_dar(s2s, store, pseudo, parallel, valid, cfg, dir, {&log, &step});
    REQUIRE(result.eval_history.size() == 3);
    REQUIRE(!result.best_checkpoint.empty());
    for (const auto& [s, bleu] : result.eval_history) CHECK(result.best_bleu >= bleu);
    const auto meta = load_checkpoint_meta(result.best_checkpoint);
    REQUIRE(meta.val_bleu.has_value());
    CHECK(*meta.val_bleu == doctest::Approx(result.best_bleu));
    long best_step = -1;
    for (const auto& [s, bleu] : result.eval_history)
      if (bleu == result.best_bleu) {  // earliest step achieving the maximum
        best_step = s;
        break;
      }
    CHECK(meta.step == best_step);
  }
  // both phases: fine-tuning starts from phase 1's selection and the final
  // checkpoint dominates the phase-2 history
  cfg.dar_phase2_steps = 2;
  {
    const std::string dir = temp_dir("dar_full");
    StepLog log(dir + "/steps.csv");
    long step = 0;
    ParamStore store;
    Rng init(cfg.seed);
    nn::AttentionS2S s2s(store, "s2s", vocab, cfg.embed_dim, cfg.hidden, init);
    const auto result =
        train_dar(s2s, store, pseudo, parallel, valid, cfg, dir, {&log, &step});
    REQUIRE(!result.best_checkpoint.empty());
    CHECK(result.best_checkpoint.find("dar_p2") != std::string::npos);
    CHECK(result.eval_history.size() == 4);  // 3 pretrain + 1 finetune
    const auto meta = load_checkpoint_meta(result.best_checkpoint);
    REQUIRE(meta.val_bleu.has_value());
    CHECK(*meta.val_bleu == doctest::Approx(result.best_bleu));
  }
}

TEST_CASE("checkpoint save, reload, forward: bit-identical logits in eval mode") {
  auto cfg = tiny_config(19);
  ModelBundle bundle(cfg, 16);
  Rng rng(12), noise(13), drop(14);
  const auto sents = random_sentences(6, 16, rng);
  for (int i = 0; i < 5; ++i) dae_step(bundle, sents, "a", noise, drop, true);

  const std::string dir = temp_dir("ckpt");
  const std::string path = dir + "/m.ckpt";
  save_checkpoint(bundle.store, path, {5, 42, std::nullopt});

  ModelBundle restored(cfg, 16);
  restored.store.load(path);

  const IdSeq probe = sents[0];
  const auto out1 = bundle.transfer(probe, "a2b", 2, 10);
  const auto out2 = restored.transfer(probe, "a2b", 2, 10);
  CHECK(out1 == out2);

  Graph g1(false), g2(false);
  const IdSeq arr[1] = {probe};
  auto batch = corpus::make_batch(arr, false);
  Tensor l1 = bundle.enc_a.encode(g1, bundle.emb_a, batch, {});
  Tensor l2 = restored.enc_a.encode(g2, restored.emb_a, batch, {});
  CHECK(l1.values() == l2.values());  // bitwise
}

TEST_CASE("training is reproducible: same config, corpus, seed, same parameters") {
  Rng data_rng(15);
  const int vocab = 16;
  const auto parallel = random_pairs(6, vocab, data_rng);
  const auto pool_a = random_sentences(8, vocab, data_rng);
  const auto pool_b = random_sentences(8, vocab, data_rng);
  const auto valid = random_pairs(2, vocab, data_rng);

  auto run = [&](const std::string& tag) {
    auto cfg = tiny_config(77);
    cfg.dropout = 0.2;  // exercise the stochastic path too
    cfg.cpls_steps = 8;
    cfg.checkpoint_every = 4;
    const std::string dir = temp_dir(tag);
    ModelBundle bundle(cfg, vocab);
    pretrain_dae(bundle, "a", pool_a, cfg, {});
    train_cpls(bundle, parallel, pool_a, pool_b, valid, cfg, dir, {});
    std::vector<double> flat;
    for (const auto& p : bundle.store.all())
      flat.insert(flat.end(), p.value.values().begin(), p.value.values().end());
    return flat;
  };
  CHECK(run("repro1") == run("repro2"));
}

TEST_CASE("step log format: header plus seven comma-separated fields") {
  const std::string dir = temp_dir("logfmt");
  {
    StepLog log(dir + "/steps.csv");
    log.log(1, "dae_a", 2.5, 0.0, 2.5, 1.0);
    log.log(2, "sup_a2b", 1.25, 0.5, 0.75, 0.1);
  }
  std::ifstream is(dir + "/steps.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "step,phase,loss,loss_dist,loss_nll,lr,wall_ms");
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 2);
}

TEST_CASE("transfer rejects bad directions and empty input") {
  auto cfg = tiny_config(20);
  ModelBundle bundle(cfg, 16);
  CHECK_THROWS_AS(bundle.transfer({4, 5}, "sideways", 2, 8), ContractError);
  CHECK_THROWS_AS(bundle.transfer({}, "a2b", 2, 8), ContractError);
}

TEST_CASE("token accuracy counts aligned matches over the longer length") {
  CHECK(token_accuracy({{1, 2, 3}}, {{1, 2, 3}}) == doctest::Approx(1.0));
  CHECK(token_accuracy({{1, 2}}, {{1, 2, 3, 4}}) == doctest::Approx(0.5));
  CHECK(token_accuracy({{1, 9, 3}}, {{1, 2, 3}}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("run manifest embeds resolved config and hash") {
  const std::string dir = temp_dir("manifest");
  Config cfg;
  cfg.set("seed", "7");
  TrainingConfig tc = TrainingConfig::from_config(cfg);
  tc.echo_into(cfg);
  TrainResult result;
  result.best_checkpoint = dir + "/x.ckpt";
  result.best_bleu = 0.5;
  write_run_manifest(dir + "/manifest.json", cfg, result, {{"bleu", 0.5}});
  std::ifstream is(dir + "/manifest.json");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(text.find("config_hash") != std::string::npos);
  CHECK(text.find("best_checkpoint") != std::string::npos);
  CHECK(text.find("\"seed\": \"7\"") != std::string::npos);
}
