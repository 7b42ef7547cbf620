#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpls/config.hpp"
#include "cpls/corpus.hpp"
#include "cpls/nn.hpp"
#include "cpls/params.hpp"

namespace cpls::training {

using corpus::Batch;
using corpus::IdSeq;

struct TrainingConfig {
  // model dimensions
  int embed_dim = 300;
  int hidden = 500;
  bool proj_two_layer = false;
  bool latent_every_step = false;

  // loss weights
  double alpha = 1.0;
  double beta = 1.0;

  // optimization
  double lr_dae = 1.0;
  double lr_s2s = 0.1;
  double lr_cpls = 0.1;
  double dropout = 0.4;
  double clip = 5.0;
  int batch_size = 32;
  int corruption_k = 3;

  // schedule
  int sup_ratio = 1;  // supervised batches per round
  int cyc_ratio = 1;  // cycle batches per round (per style)
  int dae_steps = 2000;
  int cpls_steps = 4000;
  int s2s_steps = 4000;
  int sls_dae_per_round = 20;
  int sls_rounds = 100;
  int dar_phase1_steps = 2000;
  int dar_phase2_steps = 1000;
  int checkpoint_every = 2000;
  int patience = 5;
  bool freeze_dae_in_cpls = false;
  int cpls_dae_steps = 0;  // extra DAE steps per round during CPLS (ablation)

  // inference
  int beam = 5;
  int max_decode_len = 40;

  uint64_t seed = 1;

  static TrainingConfig from_config(const Config& cfg);
  void echo_into(Config& cfg) const;
};

// ----------------------------------------------------------------- bundle

// The five trainable parts: per-style encoder/decoder pairs plus the two
// projections (and each style's embedding table, shared by its encoder and
// decoder).
struct ModelBundle {
  TrainingConfig cfg;
  int vocab_size = 0;
  ParamStore store;
  nn::EmbeddingTable emb_a, emb_b;
  nn::BiLstmEncoder enc_a, enc_b;
  nn::LstmDecoder dec_a, dec_b;
  nn::Projection f, g;  // a->b, b->a

  ModelBundle(const TrainingConfig& cfg, int vocab_size);

  // encode with the source style, project, beam-decode with the target style;
  // sls_path skips the projection (shared-latent transfer)
  IdSeq transfer(const IdSeq& sentence, const std::string& direction, int beam_width,
                 int max_len, bool sls_path = false) const;
};

// --------------------------------------------------------------- step log

// comma-separated: step, phase, loss, loss_dist, loss_nll, lr, wall_ms.
// Wall-clock time appears here and nowhere else.
class StepLog {
 public:
  explicit StepLog(const std::string& path);
  ~StepLog();
  StepLog(const StepLog&) = delete;
  StepLog& operator=(const StepLog&) = delete;
  void log(long step, const std::string& phase, double loss, double l1, double l2,
           double lr);

 private:
  struct Impl;
  Impl* impl_;
};

// ------------------------------------------------------------ checkpoints

struct CheckpointMeta {
  long step = 0;
  uint64_t config_hash = 0;
  std::optional<double> val_bleu;
};

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const CheckpointMeta& meta);
CheckpointMeta load_checkpoint_meta(const std::string& path);

// -------------------------------------------------------------- training

struct LossParts {
  double l1 = 0.0;  // latent distance
  double l2 = 0.0;  // NLL
  double total = 0.0;
};

struct StepHooks {
  StepLog* log = nullptr;
  long* step_counter = nullptr;
};

// one supervised cross-projection update on a parallel batch
LossParts cpls_supervised_step(ModelBundle& bundle,
                               std::span<const std::pair<IdSeq, IdSeq>> pairs,
                               const std::string& direction, Rng& drop_rng,
                               bool update = true);

// one cycle update on a nonparallel batch of the given style ("a" or "b")
LossParts cpls_cycle_step(ModelBundle& bundle, std::span<const IdSeq> sentences,
                          const std::string& style, Rng& drop_rng, bool update = true);

// one denoising-autoencoder update (corrupted input, original target)
struct DaeStepResult {
  double loss = 0.0;
  long correct = 0;
  long total = 0;
};
DaeStepResult dae_step(ModelBundle& bundle, std::span<const IdSeq> sentences,
                       const std::string& style, Rng& noise_rng, Rng& drop_rng,
                       bool update = true);

// one cross-linked update (encoder of src feeding decoder of tgt, no
// projection): the SLS building block
double sls_s2s_step(ModelBundle& bundle,
                    std::span<const std::pair<IdSeq, IdSeq>> pairs,
                    const std::string& direction, Rng& drop_rng);

struct TrainResult {
  std::string best_checkpoint;
  double best_bleu = -1.0;
  long steps = 0;
  std::vector<std::pair<long, double>> eval_history;  // (step, validation BLEU)
};

void pretrain_dae(ModelBundle& bundle, const std::string& style,
                  const std::vector<IdSeq>& pool, const TrainingConfig& cfg,
                  StepHooks hooks);

TrainResult train_cpls(ModelBundle& bundle,
                       const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                       const std::vector<IdSeq>& pool_a,
                       const std::vector<IdSeq>& pool_b,
                       const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                       const TrainingConfig& cfg, const std::string& out_dir,
                       StepHooks hooks);

TrainResult train_sls(ModelBundle& bundle,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<IdSeq>& pool_a,
                      const std::vector<IdSeq>& pool_b,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks);

TrainResult train_s2s(nn::AttentionS2S& model, ParamStore& store,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks);

// phase 1 pretrains on the pseudo-parallel pairs with periodic checkpoints,
// restores the checkpoint with the best validation BLEU (ties -> earliest),
// then phase 2 fine-tunes on the true parallel data
TrainResult train_dar(nn::AttentionS2S& model, ParamStore& store,
                      const std::vector<std::pair<IdSeq, IdSeq>>& pseudo,
                      const std::vector<std::pair<IdSeq, IdSeq>>& parallel,
                      const std::vector<std::pair<IdSeq, IdSeq>>& valid,
                      const TrainingConfig& cfg, const std::string& out_dir,
                      StepHooks hooks);

// ------------------------------------------------------------- evaluation

// decodes every source (read-only model, parallel across sentences, merged by
// index) and scores BLEU against gold; the SLS path skips projections
double validation_bleu(const ModelBundle& bundle,
                       const std::vector<std::pair<IdSeq, IdSeq>>& pairs,
                       const std::string& direction, int beam_width, int max_len,
                       bool sls_path = false);
double validation_bleu(const nn::AttentionS2S& model,
                       const std::vector<std::pair<IdSeq, IdSeq>>& pairs,
                       const std::string& direction, int beam_width, int max_len);

// mean fraction of matching positions, length mismatches counted as misses
double token_accuracy(const std::vector<IdSeq>& outputs,
                      const std::vector<IdSeq>& golds);

// greedy reconstruction accuracy of a DAE over clean inputs
double dae_reconstruction_accuracy(const ModelBundle& bundle, const std::string& style,
                                   const std::vector<IdSeq>& sentences, int max_len);

// writes config echo + hash, best checkpoint path and final metrics
void write_run_manifest(const std::string& path, const Config& cfg,
                        const TrainResult& result,
                        const std::vector<std::pair<std::string, double>>& metrics);

}  // namespace cpls::training
