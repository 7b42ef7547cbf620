#include "cpls/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cpls/error.hpp"

namespace cpls::retrieval {

TfIdfIndex TfIdfIndex::build(const std::vector<TokenSeq>& docs, bool smooth_idf) {
  if (docs.empty()) throw ContractError("build_index: empty corpus");
  TfIdfIndex idx;
  idx.n_docs_ = static_cast<int>(docs.size());
  idx.smooth_ = smooth_idf;
  for (int d = 0; d < idx.n_docs_; ++d) {
    std::map<std::string, int> tf;
    for (const auto& tok : docs[d]) ++tf[tok];
    for (const auto& [tok, count] : tf) idx.postings_[tok].emplace_back(d, count);
  }
  idx.doc_norms_.assign(idx.n_docs_, 0.0);
  for (const auto& [tok, posting] : idx.postings_) {
    const double w_idf = idx.idf(tok);
    for (const auto& [d, tf] : posting) {
      const double w = tf * w_idf;
      idx.doc_norms_[d] += w * w;
    }
  }
  for (auto& n : idx.doc_norms_) n = std::sqrt(n);
  return idx;
}

int TfIdfIndex::doc_freq(const std::string& token) const {
  auto it = postings_.find(token);
  return it == postings_.end() ? 0 : static_cast<int>(it->second.size());
}

double TfIdfIndex::idf(const std::string& token) const {
  const int df = doc_freq(token);
  if (df == 0) return 0.0;
  const double ratio = static_cast<double>(n_docs_) / df;
  return smooth_ ? std::log(1.0 + ratio) : std::log(ratio);
}

std::optional<RetrievalHit> TfIdfIndex::retrieve_top1(const TokenSeq& query) const {
  // query tf-idf vector under this index's document frequencies
  std::map<std::string, int> qtf;
  for (const auto& tok : query) ++qtf[tok];
  double qnorm_sq = 0.0;
  for (const auto& [tok, tf] : qtf) {
    const double w = weight(tok, tf);
    qnorm_sq += w * w;
  }
  if (qnorm_sq == 0.0) return std::nullopt;
  const double qnorm = std::sqrt(qnorm_sq);

  std::unordered_map<int, double> dot;
  for (const auto& [tok, tf] : qtf) {
    auto it = postings_.find(tok);
    if (it == postings_.end()) continue;
    const double qw = weight(tok, tf);
    if (qw == 0.0) continue;
    for (const auto& [d, dtf] : it->second) dot[d] += qw * weight(tok, dtf);
  }

  RetrievalHit best;
  for (const auto& [d, dp] : dot) {
    if (dp <= 0.0 || doc_norms_[d] == 0.0) continue;
    const double sim = dp / (qnorm * doc_norms_[d]);
    if (sim > best.score || (sim == best.score && d < best.doc_id)) {
      best.doc_id = d;
      best.score = sim;
    }
  }
  if (best.doc_id < 0 || best.score <= 0.0) return std::nullopt;
  return best;
}

void TfIdfIndex::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write index: " + path);
  os << "tfidf 1 " << n_docs_ << ' ' << (smooth_ ? 1 : 0) << '\n';
  os.precision(17);
  for (const auto& [tok, posting] : postings_) {
    os << tok << '\t' << posting.size();
    for (const auto& [d, tf] : posting) os << ' ' << d << ' ' << tf;
    os << '\n';
  }
  if (!os) throw DataError("index write failed: " + path);
}

TfIdfIndex TfIdfIndex::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open index: " + path);
  std::string magic;
  int version = 0, n = 0, smooth = 0;
  is >> magic >> version >> n >> smooth;
  if (magic != "tfidf" || version != 1)
    throw DataError("not a tf-idf index file: " + path);
  TfIdfIndex idx;
  idx.n_docs_ = n;
  idx.smooth_ = smooth != 0;
  std::string line;
  std::getline(is, line);  // consume header line end
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed index line: " + line);
    const std::string tok = line.substr(0, tab);
    std::istringstream rest(line.substr(tab + 1));
    size_t cnt = 0;
    rest >> cnt;
    auto& posting = idx.postings_[tok];
    for (size_t i = 0; i < cnt; ++i) {
      int d = 0, tf = 0;
      rest >> d >> tf;
      posting.emplace_back(d, tf);
    }
    if (!rest) throw DataError("malformed posting list for token: " + tok);
  }
  idx.doc_norms_.assign(idx.n_docs_, 0.0);
  for (const auto& [tok, posting] : idx.postings_) {
    const double w_idf = idx.idf(tok);
    for (const auto& [d, tf] : posting) {
      const double w = tf * w_idf;
      idx.doc_norms_[d] += w * w;
    }
  }
  for (auto& v : idx.doc_norms_) v = std::sqrt(v);
  return idx;
}

namespace {

std::vector<size_t> sample_without_replacement(size_t pool, size_t n, Rng& rng) {
  std::vector<size_t> idx(pool);
  for (size_t i = 0; i < pool; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(n);
  return idx;
}

std::string pair_key(const TokenSeq& a, const TokenSeq& b) {
  std::string key;
  for (const auto& t : a) {
    key += t;
    key += '\x1f';
  }
  key += '\x1e';
  for (const auto& t : b) {
    key += t;
    key += '\x1f';
  }
  return key;
}

}  // namespace

PseudoParallel build_pseudo_parallel(const TfIdfIndex& index_a,
                                     const TfIdfIndex& index_b,
                                     const std::vector<TokenSeq>& pool_a,
                                     const std::vector<TokenSeq>& pool_b,
                                     size_t n_queries_per_side, Rng& rng) {
  if (n_queries_per_side > pool_a.size() || n_queries_per_side > pool_b.size())
    throw ContractError("build_pseudo_parallel: more queries than pool sentences");

  PseudoParallel out;
  std::set<std::string> seen;
  auto push = [&](const TokenSeq& a, const TokenSeq& b, double score) {
    const std::string key = pair_key(a, b);
    if (seen.count(key)) {
      ++out.dropped_dupes;
      return;
    }
    seen.insert(key);
    out.pairs.pairs.emplace_back(a, b);
    out.scores.push_back(score);
  };

  // style-a queries search the style-b index
  for (size_t qi : sample_without_replacement(pool_a.size(), n_queries_per_side, rng)) {
    const auto hit = index_b.retrieve_top1(pool_a[qi]);
    if (!hit) {
      ++out.dropped_no_hit;
      continue;
    }
    push(pool_a[qi], pool_b[hit->doc_id], hit->score);
  }
  // style-b queries search the style-a index; pairs stay oriented (a, b)
  for (size_t qi : sample_without_replacement(pool_b.size(), n_queries_per_side, rng)) {
    const auto hit = index_a.retrieve_top1(pool_b[qi]);
    if (!hit) {
      ++out.dropped_no_hit;
      continue;
    }
    push(pool_a[hit->doc_id], pool_b[qi], hit->score);
  }
  return out;
}

}  // namespace cpls::retrieval
