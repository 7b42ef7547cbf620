#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpls/corpus.hpp"
#include "cpls/nn.hpp"
#include "cpls/params.hpp"

namespace cpls::eval {

using corpus::TokenSeq;

// Corpus-level BLEU-4 on [0, 1]: clipped modified n-gram precisions for
// n = 1..4, geometric mean, brevity penalty exp(1 - r/c) when c < r. When any
// order has zero matches corpus-wide, precisions for n >= 2 switch to
// (m+1)/(c+1); p1 is never smoothed.
double bleu(const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references);

// GLEU: same scaffold, but per sentence the clipped matches subtract
// candidate n-grams found in source-minus-reference (floored at zero), so
// copying source material that the reference rewrote is penalized.
double gleu(const std::vector<TokenSeq>& sources,
            const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references);

// one-line description of the metric variants, embedded in report files
std::string metric_notes();

// ------------------------------------------------------------- style

struct ClassifierConfig {
  int embed_dim = 64;
  int feature_maps = 100;          // per filter width
  std::vector<int> widths{3, 4, 5};
  double dropout = 0.5;
  double lr = 0.1;
  int epochs = 4;
  double holdout = 0.1;
  uint64_t seed = 7;
};

// CNN sentence classifier: parallel convolutions over embeddings,
// max-over-time pooling, two-way softmax.
class StyleClassifier {
 public:
  StyleClassifier(const corpus::Vocabulary& vocab, const ClassifierConfig& cfg);

  // labels: pool A -> class 0, pool B -> class 1; holds out a fraction for
  // the reported accuracy. Throws ContractError when a pool is empty.
  void train(const std::vector<TokenSeq>& pool_a, const std::vector<TokenSeq>& pool_b);

  int classify(const TokenSeq& sentence) const;   // argmax class
  std::vector<double> class_probs(const TokenSeq& sentence) const;
  double heldout_accuracy() const { return heldout_accuracy_; }

  const corpus::Vocabulary& vocab() const { return vocab_; }

 private:
  Tensor forward_logits(Graph& g, const corpus::IdSeq& ids, nn::DropoutCfg drop) const;
  corpus::IdSeq encode_padded(const TokenSeq& sentence) const;

  corpus::Vocabulary vocab_;
  ClassifierConfig cfg_;
  ParamStore store_;
  nn::EmbeddingTable embed_;
  std::vector<Tensor> conv_w_, conv_b_;
  Tensor out_w_, out_b_;
  double heldout_accuracy_ = 0.0;
};

// fraction of sentences assigned to the target style (0 = A, 1 = B);
// empty input has no answer and reports nullopt rather than 0
std::optional<double> style_accuracy(const StyleClassifier& clf,
                                     const std::vector<TokenSeq>& transferred,
                                     int target_style);

// ------------------------------------------------------------- reports

struct DirectionReport {
  std::string direction;  // "a2b" or "b2a"
  std::optional<double> acc;
  double bleu = 0.0;
  double gleu = 0.0;
  size_t n = 0;
  double classifier_heldout_acc = 0.0;
};

struct EvalReport {
  uint64_t config_hash = 0;
  std::vector<DirectionReport> directions;

  void save_json(const std::string& path) const;
  std::string console_table() const;  // both 0-1 and 0-100 scales
};

// transfers every test source, then scores style accuracy, BLEU against the
// gold side and GLEU against (source, gold)
using TransferFn = std::function<TokenSeq(const TokenSeq&)>;
DirectionReport evaluate_direction(const TransferFn& transfer,
                                   const std::vector<TokenSeq>& sources,
                                   const std::vector<TokenSeq>& gold,
                                   const StyleClassifier& clf, int target_style,
                                   const std::string& direction);

// trivial aggregation of externally produced human scores:
// csv lines "aspect,score" -> mean per aspect
std::vector<std::pair<std::string, double>> aggregate_human_scores(
    const std::string& csv_path);

}  // namespace cpls::eval
