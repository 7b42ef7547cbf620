#include "cpls/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cpls/error.hpp"

namespace cpls::eval {

using corpus::IdSeq;
using corpus::Vocabulary;

// ----------------------------------------------------------------- n-grams

namespace {

using NgramCounts = std::map<std::string, long long>;

std::string ngram_key(const TokenSeq& sent, size_t start, size_t n) {
  std::string key;
  for (size_t i = 0; i < n; ++i) {
    key += sent[start + i];
    key += '\x1f';
  }
  return key;
}

NgramCounts count_ngrams(const TokenSeq& sent, size_t n) {
  NgramCounts counts;
  if (sent.size() >= n)
    for (size_t i = 0; i + n <= sent.size(); ++i) ++counts[ngram_key(sent, i, n)];
  return counts;
}

struct PrecisionTotals {
  long long matches[5] = {0, 0, 0, 0, 0};     // index by n
  long long candidates[5] = {0, 0, 0, 0, 0};
  long long cand_len = 0;
  long long ref_len = 0;

  double score() const {
    if (candidates[1] == 0) return 0.0;
    bool smooth = false;
    for (int n = 1; n <= 4; ++n)
      if (matches[n] == 0) smooth = true;
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
      double p;
      if (n >= 2 && smooth)
        p = static_cast<double>(matches[n] + 1) / static_cast<double>(candidates[n] + 1);
      else if (candidates[n] == 0 || matches[n] == 0)
        return 0.0;
      else
        p = static_cast<double>(matches[n]) / static_cast<double>(candidates[n]);
      log_sum += std::log(p);
    }
    double bp = 1.0;
    if (cand_len < ref_len)
      bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_sum / 4.0);
  }
};

}  // namespace

double bleu(const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references) {
  if (candidates.size() != references.size())
    throw ContractError("bleu: candidate/reference count mismatch");
  if (references.empty()) throw ContractError("bleu: empty reference list");

  PrecisionTotals totals;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& ref = references[i];
    totals.cand_len += static_cast<long long>(cand.size());
    totals.ref_len += static_cast<long long>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      const auto c_counts = count_ngrams(cand, n);
      const auto r_counts = count_ngrams(ref, n);
      for (const auto& [gram, c] : c_counts) {
        totals.candidates[n] += c;
        auto it = r_counts.find(gram);
        if (it != r_counts.end()) totals.matches[n] += std::min(c, it->second);
      }
    }
  }
  return totals.score();
}

double gleu(const std::vector<TokenSeq>& sources,
            const std::vector<TokenSeq>& candidates,
            const std::vector<TokenSeq>& references) {
  if (sources.size() != candidates.size() || candidates.size() != references.size())
    throw ContractError("gleu: list length mismatch");
  if (references.empty()) throw ContractError("gleu: empty input");

  PrecisionTotals totals;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& src = sources[i];
    const auto& cand = candidates[i];
    const auto& ref = references[i];
    totals.cand_len += static_cast<long long>(cand.size());
    totals.ref_len += static_cast<long long>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      const auto c_counts = count_ngrams(cand, n);
      const auto r_counts = count_ngrams(ref, n);
      const auto s_counts = count_ngrams(src, n);
      long long matched = 0, penalty = 0, total = 0;
      for (const auto& [gram, c] : c_counts) {
        total += c;
        auto rit = r_counts.find(gram);
        const long long r = rit == r_counts.end() ? 0 : rit->second;
        matched += std::min(c, r);
        auto sit = s_counts.find(gram);
        if (sit != s_counts.end()) {
          const long long src_minus_ref = std::max<long long>(sit->second - r, 0);
          penalty += std::min(c, src_minus_ref);
        }
      }
      totals.candidates[n] += total;
      totals.matches[n] += std::max<long long>(matched - penalty, 0);
    }
  }
  return totals.score();
}

std::string metric_notes() {
  return "bleu: corpus BLEU-4, clipped modified precision, +1/+1 smoothing on "
         "n>=2 when any order has zero matches, brevity penalty exp(1-r/c); "
         "gleu: same scaffold with per-sentence matches reduced by candidate "
         "n-grams in source-minus-reference (floored at 0)";
}

// ------------------------------------------------------------- classifier

StyleClassifier::StyleClassifier(const corpus::Vocabulary& vocab,
                                 const ClassifierConfig& cfg)
    : vocab_(vocab), cfg_(cfg) {
  Rng rng(cfg.seed);
  embed_ = nn::EmbeddingTable(store_, "clf.embed", vocab_.size(), cfg.embed_dim, rng);
  for (int w : cfg_.widths) {
    conv_w_.push_back(store_.add_uniform("clf.conv" + std::to_string(w) + ".w",
                                         {w * cfg.embed_dim, cfg.feature_maps}, rng,
                                         -0.1, 0.1));
    conv_b_.push_back(store_.add("clf.conv" + std::to_string(w) + ".b",
                                 {cfg.feature_maps}));
  }
  const int pooled = cfg.feature_maps * static_cast<int>(cfg_.widths.size());
  out_w_ = store_.add_uniform("clf.out.w", {pooled, 2}, rng, -0.1, 0.1);
  out_b_ = store_.add("clf.out.b", {2});
}

corpus::IdSeq StyleClassifier::encode_padded(const TokenSeq& sentence) const {
  IdSeq ids = vocab_.encode(sentence);
  const int min_len = *std::max_element(cfg_.widths.begin(), cfg_.widths.end());
  while (static_cast<int>(ids.size()) < min_len) ids.push_back(Vocabulary::kPad);
  return ids;
}

Tensor StyleClassifier::forward_logits(Graph& g, const IdSeq& ids,
                                       nn::DropoutCfg drop) const {
  Tensor x = embed_.lookup(g, ids);  // T x dim
  Tensor pooled;
  for (size_t i = 0; i < cfg_.widths.size(); ++i) {
    Tensor fmap = g.relu(g.add_rowvec(g.conv1d(x, conv_w_[i], cfg_.widths[i]),
                                      conv_b_[i]));
    Tensor mx = g.max_rows(fmap);  // 1 x feature_maps
    pooled = pooled.defined() ? g.concat_cols(pooled, mx) : mx;
  }
  pooled = nn::maybe_dropout(g, pooled, drop);
  return g.add_rowvec(g.matmul(pooled, out_w_), out_b_);
}

void StyleClassifier::train(const std::vector<TokenSeq>& pool_a,
                            const std::vector<TokenSeq>& pool_b) {
  if (pool_a.empty() || pool_b.empty())
    throw ContractError("train_style_classifier: both style pools must be non-empty");

  struct Example {
    IdSeq ids;
    int label;
  };
  std::vector<Example> all;
  for (const auto& s : pool_a) all.push_back({encode_padded(s), 0});
  for (const auto& s : pool_b) all.push_back({encode_padded(s), 1});

  Rng rng(cfg_.seed ^ 0x5eed);
  rng.shuffle(all);
  const size_t held = std::max<size_t>(1, static_cast<size_t>(all.size() * cfg_.holdout));
  std::vector<Example> heldout(all.begin(), all.begin() + held);
  std::vector<Example> train_set(all.begin() + held, all.end());
  if (train_set.empty()) throw ContractError("train_style_classifier: corpus too small");

  Rng drop_rng = rng.split(1);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(train_set);
    for (const auto& ex : train_set) {
      Graph g(true);
      nn::DropoutCfg drop{cfg_.dropout, true, &drop_rng};
      Tensor logp = g.log_softmax(forward_logits(g, ex.ids, drop));
      const int ids[1] = {ex.label};
      const double mask[1] = {1.0};
      Tensor loss = g.pick_nll(logp, ids, mask);
      g.backward(loss);
      store_.sgd_step(cfg_.lr, 5.0);
    }
  }

  size_t correct = 0;
  for (const auto& ex : heldout) {
    Graph g(false);
    Tensor logits = forward_logits(g, ex.ids, {});
    correct += (logits.values()[1] > logits.values()[0] ? 1 : 0) == ex.label;
  }
  heldout_accuracy_ = static_cast<double>(correct) / static_cast<double>(heldout.size());
}

int StyleClassifier::classify(const TokenSeq& sentence) const {
  Graph g(false);
  Tensor logits = forward_logits(g, encode_padded(sentence), {});
  return logits.values()[1] > logits.values()[0] ? 1 : 0;
}

std::vector<double> StyleClassifier::class_probs(const TokenSeq& sentence) const {
  Graph g(false);
  Tensor probs = g.softmax(forward_logits(g, encode_padded(sentence), {}));
  return probs.values();
}

std::optional<double> style_accuracy(const StyleClassifier& clf,
                                     const std::vector<TokenSeq>& transferred,
                                     int target_style) {
  if (transferred.empty()) return std::nullopt;
  size_t hits = 0;
  for (const auto& s : transferred) hits += clf.classify(s) == target_style;
  return static_cast<double>(hits) / static_cast<double>(transferred.size());
}

// --------------------------------------------------------------- reports

DirectionReport evaluate_direction(const TransferFn& transfer,
                                   const std::vector<TokenSeq>& sources,
                                   const std::vector<TokenSeq>& gold,
                                   const StyleClassifier& clf, int target_style,
                                   const std::string& direction) {
  if (sources.size() != gold.size())
    throw ContractError("evaluate: source/gold size mismatch");
  std::vector<TokenSeq> outputs(sources.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(sources.size()); ++i)
    outputs[i] = transfer(sources[i]);  // merged by index: deterministic

  DirectionReport rep;
  rep.direction = direction;
  rep.n = sources.size();
  rep.acc = style_accuracy(clf, outputs, target_style);
  rep.bleu = bleu(outputs, gold);
  rep.gleu = gleu(sources, outputs, gold);
  rep.classifier_heldout_acc = clf.heldout_accuracy();
  return rep;
}

void EvalReport::save_json(const std::string& path) const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["notes"] = metric_notes();
  j["directions"] = nlohmann::json::array();
  for (const auto& d : directions) {
    nlohmann::json jd;
    jd["direction"] = d.direction;
    if (d.acc)
      jd["acc"] = *d.acc;
    else
      jd["acc"] = "no-data";
    jd["bleu"] = d.bleu;
    jd["gleu"] = d.gleu;
    jd["n"] = d.n;
    jd["classifier_heldout_acc"] = d.classifier_heldout_acc;
    j["directions"].push_back(jd);
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write report: " + path);
  os << j.dump(2) << '\n';
}

std::string EvalReport::console_table() const {
  std::ostringstream os;
  os << "direction      acc        bleu [0-1] (0-100)   gleu [0-1] (0-100)   n\n";
  for (const auto& d : directions) {
    os << std::left << std::setw(12) << d.direction << "  ";
    if (d.acc)
      os << std::fixed << std::setprecision(3) << std::setw(9) << *d.acc;
    else
      os << std::setw(9) << "no-data";
    os << "  " << std::fixed << std::setprecision(4) << d.bleu << " (" << std::setprecision(2)
       << 100.0 * d.bleu << ")      " << std::setprecision(4) << d.gleu << " ("
       << std::setprecision(2) << 100.0 * d.gleu << ")      " << d.n << '\n';
  }
  os << "classifier heldout accuracy: " << std::setprecision(3)
     << (directions.empty() ? 0.0 : directions.front().classifier_heldout_acc) << '\n';
  return os.str();
}

std::vector<std::pair<std::string, double>> aggregate_human_scores(
    const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw DataError("cannot open score file: " + csv_path);
  std::map<std::string, std::pair<double, size_t>> sums;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(csv_path + ":" + std::to_string(lineno) +
                      ": expected 'aspect,score'");
    const std::string aspect = line.substr(0, comma);
    if (aspect == "aspect") continue;  // header
    auto& [sum, count] = sums[aspect];
    sum += std::stod(line.substr(comma + 1));
    ++count;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [aspect, sc] : sums) out.emplace_back(aspect, sc.first / sc.second);
  return out;
}

}  // namespace cpls::eval
