#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpls/corpus.hpp"
#include "cpls/rng.hpp"

namespace cpls::retrieval {

using corpus::TokenSeq;

struct RetrievalHit {
  int doc_id = -1;
  double score = 0.0;  // cosine similarity in (0, 1]
};

// Inverted index with tf-idf weighting: weight(t, d) = tf(t,d) * ln(N/df(t))
// (natural log, raw term counts). The smoothed variant uses ln(1 + N/df).
class TfIdfIndex {
 public:
  static TfIdfIndex build(const std::vector<TokenSeq>& docs, bool smooth_idf = false);

  int n_docs() const { return n_docs_; }
  int doc_freq(const std::string& token) const;
  double idf(const std::string& token) const;
  double weight(const std::string& token, int tf) const { return tf * idf(token); }
  double doc_norm(int doc_id) const { return doc_norms_[doc_id]; }

  // document maximizing cosine similarity against the query's tf-idf vector;
  // ties break toward the lowest doc id; nothing when the best similarity is 0
  std::optional<RetrievalHit> retrieve_top1(const TokenSeq& query) const;

  void save(const std::string& path) const;
  static TfIdfIndex load(const std::string& path);

 private:
  int n_docs_ = 0;
  bool smooth_ = false;
  // token -> (doc id, term frequency), doc ids ascending
  std::map<std::string, std::vector<std::pair<int, int>>> postings_;
  std::vector<double> doc_norms_;
};

struct PseudoPair {
  TokenSeq query;
  TokenSeq retrieved;
  double score = 0.0;  // > 0 by construction
};

// Samples n_queries_per_side sentences without replacement from each pool,
// retrieves top-1 from the opposite style's index, keeps the non-empty
// results oriented as (style A, style B) and drops duplicate pairs.
struct PseudoParallel {
  corpus::RawParallel pairs;
  std::vector<double> scores;
  size_t dropped_no_hit = 0;   // zero-similarity queries
  size_t dropped_dupes = 0;
};

PseudoParallel build_pseudo_parallel(const TfIdfIndex& index_a,
                                     const TfIdfIndex& index_b,
                                     const std::vector<TokenSeq>& pool_a,
                                     const std::vector<TokenSeq>& pool_b,
                                     size_t n_queries_per_side, Rng& rng);

}  // namespace cpls::retrieval
