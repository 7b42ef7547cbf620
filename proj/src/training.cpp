#include "cpls/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "cpls/error.hpp"
#include "cpls/eval.hpp"

namespace cpls::training {

using corpus::Vocabulary;
using corpus::make_batch;

// ------------------------------------------------------------------ config

TrainingConfig TrainingConfig::from_config(const Config& c) {
  TrainingConfig t;
  t.embed_dim = static_cast<int>(c.get_int("embed_dim", t.embed_dim));
  t.hidden = static_cast<int>(c.get_int("hidden", t.hidden));
  t.proj_two_layer = c.get_bool("proj_two_layer", t.proj_two_layer);
  t.latent_every_step = c.get_bool("latent_every_step", t.latent_every_step);
  t.alpha = c.get_double("alpha", t.alpha);
  t.beta = c.get_double("beta", t.beta);
  if (t.alpha < 0 || t.beta < 0 || (t.alpha == 0 && t.beta == 0))
    throw ContractError("loss weights must be nonnegative and not both zero");
  t.lr_dae = c.get_double("lr_dae", t.lr_dae);
  t.lr_s2s = c.get_double("lr_s2s", t.lr_s2s);
  t.lr_cpls = c.get_double("lr_cpls", t.lr_s2s);
  t.dropout = c.get_double("dropout", t.dropout);
  t.clip = c.get_double("clip", t.clip);
  t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
  t.corruption_k = static_cast<int>(c.get_int("corruption_k", t.corruption_k));
  t.sup_ratio = static_cast<int>(c.get_int("sup_ratio", t.sup_ratio));
  t.cyc_ratio = static_cast<int>(c.get_int("cyc_ratio", t.cyc_ratio));
  t.dae_steps = static_cast<int>(c.get_int("dae_steps", t.dae_steps));
  t.cpls_steps = static_cast<int>(c.get_int("cpls_steps", t.cpls_steps));
  t.s2s_steps = static_cast<int>(c.get_int("s2s_steps", t.s2s_steps));
  t.sls_dae_per_round = static_cast<int>(c.get_int("sls_dae_per_round", t.sls_dae_per_round));
  t.sls_rounds = static_cast<int>(c.get_int("sls_rounds", t.sls_rounds));
  t.dar_phase1_steps = static_cast<int>(c.get_int("dar_phase1_steps", t.dar_phase1_steps));
  t.dar_phase2_steps = static_cast<int>(c.get_int("dar_phase2_steps", t.dar_phase2_steps));
  t.checkpoint_every = static_cast<int>(c.get_int("checkpoint_every", t.checkpoint_every));
  t.patience = static_cast<int>(c.get_int("patience", t.patience));
  t.freeze_dae_in_cpls = c.get_bool("freeze_dae_in_cpls", t.freeze_dae_in_cpls);
  t.cpls_dae_steps = static_cast<int>(c.get_int("cpls_dae_steps", t.cpls_dae_steps));
  t.beam = static_cast<int>(c.get_int("beam", t.beam));
  t.max_decode_len = static_cast<int>(c.get_int("max_decode_len", t.max_decode_len));
  t.seed = static_cast<uint64_t>(c.get_int("seed", static_cast<long long>(t.seed)));
  return t;
}

void TrainingConfig::echo_into(Config& c) const {
  auto seti = [&](const char* k, long long v) { c.set(k, std::to_string(v)); };
  auto setd = [&](const char* k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    c.set(k, buf);
  };
  seti("embed_dim", embed_dim);
  seti("hidden", hidden);
  c.set("proj_two_layer", proj_two_layer ? "true" : "false");
  c.set("latent_every_step", latent_every_step ? "true" : "false");
  setd("alpha", alpha);
  setd("beta", beta);
  setd("lr_dae", lr_dae);
  setd("lr_s2s", lr_s2s);
  setd("lr_cpls", lr_cpls);
  setd("dropout", dropout);
  setd("clip", clip);
  seti("batch_size", batch_size);
  seti("corruption_k", corruption_k);
  seti("sup_ratio", sup_ratio);
  seti("cyc_ratio", cyc_ratio);
  seti("dae_steps", dae_steps);
  seti("cpls_steps", cpls_steps);
  seti("s2s_steps", s2s_steps);
  seti("sls_dae_per_round", sls_dae_per_round);
  seti("sls_rounds", sls_rounds);
  seti("dar_phase1_steps", dar_phase1_steps);
  seti("dar_phase2_steps", dar_phase2_steps);
  seti("checkpoint_every", checkpoint_every);
  seti("patience", patience);
  c.set("freeze_dae_in_cpls", freeze_dae_in_cpls ? "true" : "false");
  seti("cpls_dae_steps", cpls_dae_steps);
  seti("beam", beam);
  seti("max_decode_len", max_decode_len);
  seti("seed", static_cast<long long>(seed));
}

// ------------------------------------------------------------------ bundle

ModelBundle::ModelBundle(const TrainingConfig& cfg_, int vocab)
    : cfg(cfg_), vocab_size(vocab) {
  Rng rng(cfg.seed);
  const int d = cfg.hidden, e = cfg.embed_dim;
  emb_a = nn::EmbeddingTable(store, "emb_a", vocab, e, rng);
  emb_b = nn::EmbeddingTable(store, "emb_b", vocab, e, rng);
  enc_a = nn::BiLstmEncoder(store, "enc_a", e, d, rng);
  enc_b = nn::BiLstmEncoder(store, "enc_b", e, d, rng);
  dec_a = nn::LstmDecoder(store, "dec_a", e, d, 2 * d, vocab, cfg.latent_every_step, rng);
  dec_b = nn::LstmDecoder(store, "dec_b", e, d, 2 * d, vocab, cfg.latent_every_step, rng);
  f = nn::Projection(store, "f", "a2b", 2 * d, cfg.proj_two_layer, rng);
  g = nn::Projection(store, "g", "b2a", 2 * d, cfg.proj_two_layer, rng);
}

IdSeq ModelBundle::transfer(const IdSeq& sentence, const std::string& direction,
                            int beam_width, int max_len, bool sls_path) const {
  if (sentence.empty()) throw ContractError("transfer: empty sentence");
  if (direction != "a2b" && direction != "b2a")
    throw ContractError("transfer: direction must be a2b or b2a, got " + direction);
  const bool a2b = direction == "a2b";
  Graph gr(false);
  const IdSeq arr[1] = {sentence};
  Batch batch = make_batch(arr, false);
  Tensor latent = (a2b ? enc_a : enc_b).encode(gr, a2b ? emb_a : emb_b, batch, {});
  if (!sls_path) latent = (a2b ? f : g).apply(gr, latent);
  return (a2b ? dec_b : dec_a).beam(a2b ? emb_b : emb_a, latent, beam_width, max_len);
}

// ---------------------------------------------------------------- step log

struct StepLog::Impl {
  std::ofstream os;
  std::chrono::steady_clock::time_point t0;
};

StepLog::StepLog(const std::string& path) : impl_(new Impl) {
  impl_->os.open(path, std::ios::trunc);
  if (!impl_->os) throw DataError("cannot open step log: " + path);
  impl_->os << "step,phase,loss,loss_dist,loss_nll,lr,wall_ms\n";
  impl_->t0 = std::chrono::steady_clock::now();
}

StepLog::~StepLog() { delete impl_; }

void StepLog::log(long step, const std::string& phase, double loss, double l1,
                  double l2, double lr) {
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - impl_->t0)
                        .count();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%s,%.10g,%.10g,%.10g,%g,%.1f\n", step,
                phase.c_str(), loss, l1, l2, lr, ms);
  impl_->os << buf;
  impl_->os.flush();
}

// -------------------------------------------------------------- checkpoints

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const CheckpointMeta& meta) {
  store.save(path);
  nlohmann::json j;
  j["step"] = meta.step;
  j["config_hash"] = meta.config_hash;
  if (meta.val_bleu) j["val_bleu"] = *meta.val_bleu;
  std::ofstream os(path + ".meta.json", std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint meta: " + path);
  os << j.dump(2) << '\n';
}

CheckpointMeta load_checkpoint_meta(const std::string& path) {
  std::ifstream is(path + ".meta.json");
  if (!is) throw DataError("cannot open checkpoint meta: " + path + ".meta.json");
  nlohmann::json j;
  is >> j;
  CheckpointMeta meta;
  meta.step = j.value("step", 0L);
  meta.config_hash = j.value("config_hash", 0ULL);
  if (j.contains("val_bleu")) meta.val_bleu = j["val_bleu"].get<double>();
  return meta;
}

// ------------------------------------------------------------ data cycling

namespace {

class Cycler {
 public:
  Cycler(size_t n, size_t batch, Rng rng)
      : n_(n), batch_(std::min(batch, n)), rng_(rng) {
    reshuffle();
  }

  std::vector<size_t> next() {
    if (pos_ + batch_ > n_) reshuffle();
    std::vector<size_t> out(order_.begin() + pos_, order_.begin() + pos_ + batch_);
    pos_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    for (size_t i = 0; i < n_; ++i) order_[i] = i;
    rng_.shuffle(order_);
    pos_ = 0;
  }

  size_t n_, batch_, pos_ = 0;
  std::vector<size_t> order_;
  Rng rng_;
};

template <typename T>
std::vector<T> gather(const std::vector<T>& items, const std::vector<size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(items[i]);
  return out;
}

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss))
    throw NumericError(std::string(what) + ": loss is not finite, training aborted");
}

// tracks periodic validation, checkpointing, best selection and patience
struct EvalLoop {
  const TrainingConfig& cfg;
  std::string out_dir;
  std::string tag;
  uint64_t config_hash;
  TrainResult result;
  int evals_since_best = 0;

  EvalLoop(const TrainingConfig& c, std::string dir, std::string tag_, uint64_t hash)
      : cfg(c), out_dir(std::move(dir)), tag(std::move(tag_)), config_hash(hash) {}

  // returns true when patience is exhausted
  bool checkpoint(const ParamStore& store, long step, double bleu) {
    char name[128];
    std::snprintf(name, sizeof name, "%s/%s_step%06ld.ckpt", out_dir.c_str(),
                  tag.c_str(), step);
    save_checkpoint(store, name, {step, config_hash, bleu});
    result.eval_history.emplace_back(step, bleu);
    if (bleu > result.best_bleu) {  // strict: ties keep the earliest step
      result.best_bleu = bleu;
      result.best_checkpoint = name;
      evals_since_best = 0;
    } else {
      ++evals_since_best;
    }
    return evals_since_best >= cfg.patience;
  }

  void restore_best(ParamStore& store) {
    if (!result.best_checkpoint.empty()) store.load(result.best_checkpoint);
  }
};

}  // namespace

// -------------------------------------------------------------- step bodies

LossParts cpls_supervised_step(ModelBundle& bundle,
                               std::span<const std::pair<IdSeq, IdSeq>> pairs,
                               const std::string& direction, Rng& drop_rng,
                               bool update) {
  if (direction != "a2b" && direction != "b2a")
    throw ContractError("cpls_supervised_step: bad direction " + direction);
  const bool a2b = direction == "a2b";
  const auto& cfg = bundle.cfg;

  std::vector<IdSeq> src, tgt;
  for (const auto& [a, b] : pairs) {
    src.push_back(a2b ? a : b);
    tgt.push_back(a2b ? b : a);
  }
  Batch src_enc = make_batch(src, false);
  Batch tgt_enc = make_batch(tgt, false);
  Batch tgt_dec = make_batch(tgt, true);

  Graph g(true);
  nn::DropoutCfg drop{cfg.dropout, update, &drop_rng};
  auto& enc_src = a2b ? bundle.enc_a : bundle.enc_b;
  auto& enc_tgt = a2b ? bundle.enc_b : bundle.enc_a;
  auto& emb_src = a2b ? bundle.emb_a : bundle.emb_b;
  auto& emb_tgt = a2b ? bundle.emb_b : bundle.emb_a;
  auto& dec_tgt = a2b ? bundle.dec_b : bundle.dec_a;
  auto& proj = a2b ? bundle.f : bundle.g;

  Tensor c_src = enc_src.encode(g, emb_src, src_enc, drop);
  Tensor c_tgt = enc_tgt.encode(g, emb_tgt, tgt_enc, drop);
  Tensor projected = proj.apply(g, c_src);
  Tensor l1 = g.euclidean_rows_mean(projected, c_tgt);
  Tensor l2 = dec_tgt.nll(g, emb_tgt, projected, tgt_dec, drop).loss;
  Tensor loss = g.add(g.scale(l1, cfg.alpha), g.scale(l2, cfg.beta));

  LossParts parts{l1.item(), l2.item(), loss.item()};
  check_finite(parts.total, "cpls_supervised_step");
  if (update) {
    g.backward(loss);
    if (cfg.freeze_dae_in_cpls) {
      const std::string prefix = a2b ? "f." : "g.";
      bundle.store.sgd_step(cfg.lr_cpls, cfg.clip, [&](const std::string& n) {
        return n.rfind(prefix, 0) == 0;
      });
    } else {
      bundle.store.sgd_step(cfg.lr_cpls, cfg.clip);
    }
  }
  return parts;
}

LossParts cpls_cycle_step(ModelBundle& bundle, std::span<const IdSeq> sentences,
                          const std::string& style, Rng& drop_rng, bool update) {
  if (style != "a" && style != "b")
    throw ContractError("cpls_cycle_step: style must be a or b, got " + style);
  const bool is_a = style == "a";
  const auto& cfg = bundle.cfg;

  std::vector<IdSeq> sents(sentences.begin(), sentences.end());
  Batch enc_batch = make_batch(sents, false);
  Batch dec_batch = make_batch(sents, true);

  Graph g(true);
  nn::DropoutCfg drop{cfg.dropout, update, &drop_rng};
  auto& enc = is_a ? bundle.enc_a : bundle.enc_b;
  auto& emb = is_a ? bundle.emb_a : bundle.emb_b;
  auto& dec = is_a ? bundle.dec_a : bundle.dec_b;
  auto& out_proj = is_a ? bundle.f : bundle.g;   // to the other space
  auto& back_proj = is_a ? bundle.g : bundle.f;  // and back

  Tensor c = enc.encode(g, emb, enc_batch, drop);
  Tensor cycled = back_proj.apply(g, out_proj.apply(g, c));
  // the original latent serves as a fixed reference, like the target sentence
  Tensor reference = g.detach(c);
  Tensor l1 = g.euclidean_rows_mean(cycled, reference);
  Tensor l2 = dec.nll(g, emb, cycled, dec_batch, drop).loss;
  Tensor loss = g.add(g.scale(l1, cfg.alpha), g.scale(l2, cfg.beta));

  LossParts parts{l1.item(), l2.item(), loss.item()};
  check_finite(parts.total, "cpls_cycle_step");
  if (update) {
    g.backward(loss);
    if (cfg.freeze_dae_in_cpls) {
      bundle.store.sgd_step(cfg.lr_cpls, cfg.clip, [](const std::string& n) {
        return n.rfind("f.", 0) == 0 || n.rfind("g.", 0) == 0;
      });
    } else {
      bundle.store.sgd_step(cfg.lr_cpls, cfg.clip);
    }
  }
  return parts;
}

DaeStepResult dae_step(ModelBundle& bundle, std::span<const IdSeq> sentences,
                       const std::string& style, Rng& noise_rng, Rng& drop_rng,
                       bool update) {
  if (style != "a" && style != "b")
    throw ContractError("dae_step: style must be a or b, got " + style);
  const bool is_a = style == "a";
  const auto& cfg = bundle.cfg;

  // corruption applies to the encoder input only; the decoder target is the
  // original sentence
  std::vector<IdSeq> corrupted, originals;
  for (const auto& s : sentences) {
    corrupted.push_back(nn::corrupt(s, cfg.corruption_k, noise_rng));
    originals.push_back(s);
  }
  Batch enc_batch = make_batch(corrupted, false);
  Batch dec_batch = make_batch(originals, true);

  Graph g(true);
  nn::DropoutCfg drop{cfg.dropout, update, &drop_rng};
  auto& enc = is_a ? bundle.enc_a : bundle.enc_b;
  auto& emb = is_a ? bundle.emb_a : bundle.emb_b;
  auto& dec = is_a ? bundle.dec_a : bundle.dec_b;

  Tensor latent = enc.encode(g, emb, enc_batch, drop);
  nn::NllResult nll = dec.nll(g, emb, latent, dec_batch, drop);

  DaeStepResult res{nll.loss.item(), nll.correct, nll.total};
  check_finite(res.loss, "dae_step");
  if (update) {
    g.backward(nll.loss);
    bundle.store.sgd_step(cfg.lr_dae, cfg.clip);
  }
  return res;
}

double sls_s2s_step(ModelBundle& bundle,
                    std::span<const std::pair<IdSeq, IdSeq>> pairs,
                    const std::string& direction, Rng& drop_rng) {
  const bool a2b = direction == "a2b";
  const auto& cfg = bundle.cfg;
  std::vector<IdSeq> src, tgt;
  for (const auto& [a, b] : pairs) {
    src.push_back(a2b ? a : b);
    tgt.push_back(a2b ? b : a);
  }
  Batch src_enc = make_batch(src, false);
  Batch tgt_dec = make_batch(tgt, true);

  Graph g(true);
  nn::DropoutCfg drop{cfg.dropout, true, &drop_rng};
  auto& enc = a2b ? bundle.enc_a : bundle.enc_b;
  auto& emb_src = a2b ? bundle.emb_a : bundle.emb_b;
  auto& emb_tgt = a2b ? bundle.emb_b : bundle.emb_a;
  auto& dec = a2b ? bundle.dec_b : bundle.dec_a;

  // the decoder takes the source latent directly: shared latent space
  Tensor latent = enc.encode(g, emb_src, src_enc, drop);
  Tensor loss = dec.nll(g, emb_tgt, latent, tgt_dec, drop).loss;
  const double value = loss.item();
  check_finite(value, "sls_s2s_step");
  g.backward(loss);
  bundle.store.sgd_step(cfg.lr_s2s, cfg.clip);
  return value;
}

// ----------------------------------------------------------------- trainers

void pretrain_dae(ModelBundle& bundle, const std::string& style,
                  const std::vector<IdSeq>& pool, const TrainingConfig& cfg,
                  StepHooks hooks) {
  if (pool.empty()) throw ContractError("pretrain_dae: empty corpus");
  Rng data_rng(cfg.seed ^ (style == "a" ? 0xA001 : 0xB001));
  Rng noise_rng = data_rng.split(1);
  Rng drop_rng = data_rng.split(2);
  Cycler cycler(pool.size(), cfg.batch_size, data_rng.split(3));

  long local_step = 0;
  long* step = hooks.step_counter ? hooks.step_counter : &local_step;
  for (int i = 0; i < cfg.dae_steps; ++i) {
    const auto idx = cycler.next();
    const auto batch = gather(pool, idx);
    const auto res = dae_step(bundle, batch, style, noise_rng, drop_rng, true);
    ++*step;
    if (hooks.log)
      hooks.log->log(*step, "dae_" + style, res.loss, 0.0, res.loss, cfg.lr_dae);
  }
}

TrainResult train_cpls(ModelBundle& bundle,
                       const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                       const std::vector<IdSeq>& pool_a,
                       const std::vector<IdSeq>& pool_b,
                       const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                       const TrainingConfig& cfg, const std::string& out_dir,
                       StepHooks hooks) {
  int sup_ratio = cfg.sup_ratio, cyc_ratio = cfg.cyc_ratio;
  if (parallel.empty()) {
    std::cerr << "[train_cpls] warning: no parallel data, falling back to "
                 "cycle-only training\n";
    sup_ratio = 0;
    cyc_ratio = std::max(1, cyc_ratio);
  }
  if (pool_a.empty() || pool_b.empty()) cyc_ratio = 0;
  if (sup_ratio == 0 && cyc_ratio == 0)
    throw ContractError("train_cpls: no usable training data");

  Config hash_cfg;
  cfg.echo_into(hash_cfg);
  EvalLoop loop(cfg, out_dir, "cpls", hash_cfg.hash());

  Rng data_rng(cfg.seed ^ 0xC915);
  Rng drop_rng = data_rng.split(1);
  Rng noise_rng = data_rng.split(2);
  Cycler sup_cycler(std::max<size_t>(parallel.size(), 1), cfg.batch_size,
                    data_rng.split(3));
  Cycler cyc_a(std::max<size_t>(pool_a.size(), 1), cfg.batch_size, data_rng.split(4));
  Cycler cyc_b(std::max<size_t>(pool_b.size(), 1), cfg.batch_size, data_rng.split(5));

  long local_step = 0;
  long* step = hooks.step_counter ? hooks.step_counter : &local_step;
  const long start = *step;
  long next_ckpt = cfg.checkpoint_every;

  auto evaluate = [&]() {
    const double b1 =
        validation_bleu(bundle, valid, "a2b", cfg.beam, cfg.max_decode_len);
    const double b2 =
        validation_bleu(bundle, valid, "b2a", cfg.beam, cfg.max_decode_len);
    return 0.5 * (b1 + b2);
  };

  bool stop = false;
  while (*step - start < cfg.cpls_steps && !stop) {
    for (int r = 0; r < sup_ratio; ++r) {
      for (const std::string dir : {"a2b", "b2a"}) {
        const auto parts = cpls_supervised_step(
            bundle, gather(parallel, sup_cycler.next()), dir, drop_rng, true);
        ++*step;
        if (hooks.log)
          hooks.log->log(*step, "sup_" + dir, parts.total, parts.l1, parts.l2,
                         cfg.lr_cpls);
      }
    }
    for (int r = 0; r < cyc_ratio; ++r) {
      for (const std::string style : {"a", "b"}) {
        const auto& pool = style == "a" ? pool_a : pool_b;
        auto& cyc = style == "a" ? cyc_a : cyc_b;
        const auto parts =
            cpls_cycle_step(bundle, gather(pool, cyc.next()), style, drop_rng, true);
        ++*step;
        if (hooks.log)
          hooks.log->log(*step, "cyc_" + style, parts.total, parts.l1, parts.l2,
                         cfg.lr_cpls);
      }
    }
    for (int r = 0; r < cfg.cpls_dae_steps; ++r) {
      for (const std::string style : {"a", "b"}) {
        const auto& pool = style == "a" ? pool_a : pool_b;
        auto& cyc = style == "a" ? cyc_a : cyc_b;
        const auto res = dae_step(bundle, gather(pool, cyc.next()), style, noise_rng,
                                  drop_rng, true);
        ++*step;
        if (hooks.log)
          hooks.log->log(*step, "dae_" + style, res.loss, 0.0, res.loss, cfg.lr_dae);
      }
    }
    if (*step - start >= next_ckpt || *step - start >= cfg.cpls_steps) {
      next_ckpt += cfg.checkpoint_every;
      stop = loop.checkpoint(bundle.store, *step, valid.empty() ? 0.0 : evaluate());
    }
  }
  loop.restore_best(bundle.store);
  loop.result.steps = *step - start;
  return loop.result;
}

TrainResult train_sls(ModelBundle& bundle,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<IdSeq>& pool_a,
                      const std::vector<IdSeq>& pool_b,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks) {
  if (pool_a.empty() || pool_b.empty())
    throw ContractError("train_sls: nonparallel pools must be non-empty");

  Config hash_cfg;
  cfg.echo_into(hash_cfg);
  EvalLoop loop(cfg, out_dir, "sls", hash_cfg.hash());

  Rng data_rng(cfg.seed ^ 0x515);
  Rng drop_rng = data_rng.split(1);
  Rng noise_rng = data_rng.split(2);
  Cycler sup_cycler(std::max<size_t>(parallel.size(), 1), cfg.batch_size,
                    data_rng.split(3));
  Cycler cyc_a(pool_a.size(), cfg.batch_size, data_rng.split(4));
  Cycler cyc_b(pool_b.size(), cfg.batch_size, data_rng.split(5));

  long local_step = 0;
  long* step = hooks.step_counter ? hooks.step_counter : &local_step;
  const long start = *step;
  long next_ckpt = cfg.checkpoint_every;

  auto evaluate = [&]() {
    const double b1 =
        validation_bleu(bundle, valid, "a2b", cfg.beam, cfg.max_decode_len, true);
    const double b2 =
        validation_bleu(bundle, valid, "b2a", cfg.beam, cfg.max_decode_len, true);
    return 0.5 * (b1 + b2);
  };

  bool stop = false;
  for (int round = 0; round < cfg.sls_rounds && !stop; ++round) {
    // 20 DAE steps (one per style inside each), then exactly one cross-linked
    // S2S step whose direction alternates per round; skipped entirely without
    // parallel data, which leaves two independent DAEs
    for (int i = 0; i < cfg.sls_dae_per_round; ++i) {
      for (const std::string style : {"a", "b"}) {
        const auto& pool = style == "a" ? pool_a : pool_b;
        auto& cyc = style == "a" ? cyc_a : cyc_b;
        const auto res = dae_step(bundle, gather(pool, cyc.next()), style, noise_rng,
                                  drop_rng, true);
        ++*step;
        if (hooks.log)
          hooks.log->log(*step, "dae_" + style, res.loss, 0.0, res.loss, cfg.lr_dae);
      }
    }
    if (!parallel.empty()) {
      const std::string dir = round % 2 == 0 ? "a2b" : "b2a";
      const double loss =
          sls_s2s_step(bundle, gather(parallel, sup_cycler.next()), dir, drop_rng);
      ++*step;
      if (hooks.log) hooks.log->log(*step, "s2s_" + dir, loss, 0.0, loss, cfg.lr_s2s);
    }
    if (*step - start >= next_ckpt || round + 1 == cfg.sls_rounds) {
      next_ckpt += cfg.checkpoint_every;
      stop = loop.checkpoint(bundle.store, *step, valid.empty() ? 0.0 : evaluate());
    }
  }
  loop.restore_best(bundle.store);
  loop.result.steps = *step - start;
  return loop.result;
}

namespace {

double s2s_supervised_step(nn::AttentionS2S& model, ParamStore& store,
                           std::span<const std::pair<IdSeq, IdSeq>> pairs,
                           const TrainingConfig& cfg, Rng& drop_rng) {
  std::vector<IdSeq> src, tgt;
  for (const auto& [a, b] : pairs) {
    src.push_back(a);
    tgt.push_back(b);
  }
  Batch src_batch = make_batch(src, false);
  Batch tgt_batch = make_batch(tgt, true);
  Graph g(true);
  nn::DropoutCfg drop{cfg.dropout, true, &drop_rng};
  Tensor loss = model.nll(g, src_batch, tgt_batch, drop);
  const double value = loss.item();
  check_finite(value, "s2s_step");
  g.backward(loss);
  store.sgd_step(cfg.lr_s2s, cfg.clip);
  return value;
}

TrainResult run_s2s_phase(nn::AttentionS2S& model, ParamStore& store,
                          const std::vector<std::pair<IdSeq, IdSeq>>& data,
                          const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                          const TrainingConfig& cfg, int steps,
                          const std::string& out_dir, const std::string& tag,
                          const std::string& phase, StepHooks hooks, uint64_t salt) {
  Config hash_cfg;
  cfg.echo_into(hash_cfg);
  EvalLoop loop(cfg, out_dir, tag, hash_cfg.hash());
  if (data.empty()) return loop.result;

  Rng data_rng(cfg.seed ^ salt);
  Rng drop_rng = data_rng.split(1);
  Cycler cycler(data.size(), cfg.batch_size, data_rng.split(2));

  long local_step = 0;
  long* step = hooks.step_counter ? hooks.step_counter : &local_step;
  const long start = *step;
  long next_ckpt = cfg.checkpoint_every;

  bool stop = false;
  while (*step - start < steps && !stop) {
    const double loss =
        s2s_supervised_step(model, store, gather(data, cycler.next()), cfg, drop_rng);
    ++*step;
    if (hooks.log) hooks.log->log(*step, phase, loss, 0.0, loss, cfg.lr_s2s);
    if (*step - start >= next_ckpt || *step - start >= steps) {
      next_ckpt += cfg.checkpoint_every;
      const double bleu =
          valid.empty()
              ? 0.0
              : validation_bleu(model, valid, "a2b", cfg.beam, cfg.max_decode_len);
      stop = loop.checkpoint(store, *step, bleu);
    }
  }
  loop.restore_best(store);
  loop.result.steps = *step - start;
  return loop.result;
}

}  // namespace

TrainResult train_s2s(nn::AttentionS2S& model, ParamStore& store,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks) {
  if (parallel.empty()) throw ContractError("train_s2s: empty parallel corpus");
  return run_s2s_phase(model, store, parallel, valid, cfg, cfg.s2s_steps, out_dir,
                       "s2s", "s2s_a2b", hooks, 0x52A);
}

TrainResult train_dar(nn::AttentionS2S& model, ParamStore& store,
                      const std::vector<std::pair<IdSeq, IdSeq>>& pseudo,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks) {
  if (pseudo.empty())
    std::cerr << "[train_dar] warning: empty pseudo-parallel corpus, phase 1 "
                 "skipped\n";
  TrainResult phase1 =
      run_s2s_phase(model, store, pseudo, valid, cfg, cfg.dar_phase1_steps, out_dir,
                    "dar_p1", "dar_pretrain", hooks, 0xDA1);
  TrainResult phase2 =
      run_s2s_phase(model, store, parallel, valid, cfg, cfg.dar_phase2_steps, out_dir,
                    "dar_p2", "dar_finetune", hooks, 0xDA2);
  TrainResult out = phase2.best_checkpoint.empty() ? phase1 : phase2;
  out.steps = phase1.steps + phase2.steps;
  out.eval_history = phase1.eval_history;
  out.eval_history.insert(out.eval_history.end(), phase2.eval_history.begin(),
                          phase2.eval_history.end());
  return out;
}

// ------------------------------------------------------------- evaluation

namespace {

std::vector<corpus::TokenSeq> ids_to_pseudo_tokens(const std::vector<IdSeq>& seqs) {
  std::vector<corpus::TokenSeq> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    corpus::TokenSeq t;
    t.reserve(s.size());
    for (int id : s) t.push_back(std::to_string(id));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

double validation_bleu(const ModelBundle& bundle,
                       const std::vector<std::pair<IdSeq, IdSeq>>& pairs,
                       const std::string& direction, int beam_width, int max_len,
                       bool sls_path) {
  if (pairs.empty()) return 0.0;
  const bool a2b = direction == "a2b";
  std::vector<IdSeq> outputs(pairs.size()), golds(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(pairs.size()); ++i) {
    const IdSeq& src = a2b ? pairs[i].first : pairs[i].second;
    outputs[i] = bundle.transfer(src, direction, beam_width, max_len, sls_path);
    golds[i] = a2b ? pairs[i].second : pairs[i].first;
  }
  return eval::bleu(ids_to_pseudo_tokens(outputs), ids_to_pseudo_tokens(golds));
}

double validation_bleu(const nn::AttentionS2S& model,
                       const std::vector<std::pair<IdSeq, IdSeq>>& pairs,
                       const std::string& direction, int beam_width, int max_len) {
  if (pairs.empty()) return 0.0;
  const bool a2b = direction == "a2b";
  std::vector<IdSeq> outputs(pairs.size()), golds(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(pairs.size()); ++i) {
    const IdSeq& src = a2b ? pairs[i].first : pairs[i].second;
    outputs[i] = model.beam_decode(src, beam_width, max_len);
    golds[i] = a2b ? pairs[i].second : pairs[i].first;
  }
  return eval::bleu(ids_to_pseudo_tokens(outputs), ids_to_pseudo_tokens(golds));
}

double token_accuracy(const std::vector<IdSeq>& outputs,
                      const std::vector<IdSeq>& golds) {
  if (outputs.size() != golds.size())
    throw ContractError("token_accuracy: size mismatch");
  long long matches = 0, total = 0;
  for (size_t i = 0; i < outputs.size(); ++i) {
    const auto& o = outputs[i];
    const auto& g = golds[i];
    const size_t common = std::min(o.size(), g.size());
    for (size_t t = 0; t < common; ++t) matches += o[t] == g[t];
    total += static_cast<long long>(std::max(o.size(), g.size()));
  }
  return total == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(total);
}

double dae_reconstruction_accuracy(const ModelBundle& bundle, const std::string& style,
                                   const std::vector<IdSeq>& sentences, int max_len) {
  const bool is_a = style == "a";
  std::vector<IdSeq> outputs(sentences.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(sentences.size()); ++i) {
    Graph g(false);
    const IdSeq arr[1] = {sentences[i]};
    Batch batch = make_batch(arr, false);
    Tensor latent = (is_a ? bundle.enc_a : bundle.enc_b)
                        .encode(g, is_a ? bundle.emb_a : bundle.emb_b, batch, {});
    outputs[i] = (is_a ? bundle.dec_a : bundle.dec_b)
                     .greedy(is_a ? bundle.emb_a : bundle.emb_b, latent, max_len);
  }
  return token_accuracy(outputs, sentences);
}

void write_run_manifest(const std::string& path, const Config& cfg,
                        const TrainResult& result,
                        const std::vector<std::pair<std::string, double>>& metrics) {
  nlohmann::json j;
  j["config"] = nlohmann::json::object();
  for (const auto& [k, v] : cfg.entries()) j["config"][k] = v;
  j["config_hash"] = cfg.hash();
  j["best_checkpoint"] = result.best_checkpoint;
  j["best_val_bleu"] = result.best_bleu;
  j["steps"] = result.steps;
  j["eval_history"] = nlohmann::json::array();
  for (const auto& [step, bleu] : result.eval_history)
    j["eval_history"].push_back({{"step", step}, {"val_bleu", bleu}});
  j["final_metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : metrics) j["final_metrics"][k] = v;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write manifest: " + path);
  os << j.dump(2) << '\n';
}

}  // namespace cpls::training
