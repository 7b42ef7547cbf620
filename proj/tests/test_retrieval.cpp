#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "cpls/corpus.hpp"
#include "cpls/retrieval.hpp"

using namespace cpls;
using namespace cpls::retrieval;
using corpus::TokenSeq;

namespace {

// brute-force oracle: full tf-idf vectors per document, dense cosine
struct BruteForce {
  std::vector<std::map<std::string, double>> doc_vecs;
  std::map<std::string, int> df;
  int n = 0;

  explicit BruteForce(const std::vector<TokenSeq>& docs) {
    n = static_cast<int>(docs.size());
    for (const auto& d : docs) {
      std::set<std::string> uniq(d.begin(), d.end());
      for (const auto& t : uniq) ++df[t];
    }
    for (const auto& d : docs) {
      std::map<std::string, int> tf;
      for (const auto& t : d) ++tf[t];
      std::map<std::string, double> vec;
      for (const auto& [t, c] : tf) vec[t] = c * std::log(double(n) / df.at(t));
      doc_vecs.push_back(vec);
    }
  }

  std::optional<RetrievalHit> top1(const TokenSeq& query) const {
    std::map<std::string, int> tf;
    for (const auto& t : query) ++tf[t];
    std::map<std::string, double> q;
    for (const auto& [t, c] : tf) {
      auto it = df.find(t);
      if (it != df.end()) q[t] = c * std::log(double(n) / it->second);
    }
    double qn = 0;
    for (const auto& [t, w] : q) qn += w * w;
    if (qn == 0) return std::nullopt;
    qn = std::sqrt(qn);

    RetrievalHit best;
    for (int d = 0; d < n; ++d) {
      double dot = 0, dn = 0;
      for (const auto& [t, w] : doc_vecs[d]) dn += w * w;
      for (const auto& [t, w] : q) {
        auto it = doc_vecs[d].find(t);
        if (it != doc_vecs[d].end()) dot += w * it->second;
      }
      if (dot <= 0 || dn == 0) continue;
      const double sim = dot / (qn * std::sqrt(dn));
      if (sim > best.score) {
        best.score = sim;
        best.doc_id = d;
      }
    }
    if (best.doc_id < 0) return std::nullopt;
    return best;
  }
};

TokenSeq words(std::initializer_list<const char*> ws) {
  TokenSeq out;
  for (const char* w : ws) out.emplace_back(w);
  return out;
}

}  // namespace

TEST_CASE("a token in every document carries zero idf") {
  const std::vector<TokenSeq> docs = {words({"the", "wind"}), words({"the", "sun"}),
                                      words({"the", "rain"})};
  const auto idx = TfIdfIndex::build(docs);
  CHECK(idx.idf("the") == 0.0);
  CHECK(idx.idf("wind") == doctest::Approx(std::log(3.0)));

  // a query sharing only that token has similarity zero everywhere
  CHECK_FALSE(idx.retrieve_top1(words({"the"})).has_value());
}

TEST_CASE("single-document corpus retrieves nothing") {
  const std::vector<TokenSeq> docs = {words({"cold", "wind", "knife"})};
  const auto idx = TfIdfIndex::build(docs);
  CHECK_FALSE(idx.retrieve_top1(words({"cold", "knife"})).has_value());
  CHECK(idx.idf("cold") == 0.0);  // ln(1/1)
}

TEST_CASE("three-document toy weights match hand tf-idf arithmetic") {
  const std::vector<TokenSeq> docs = {words({"cold", "wind", "wind"}),
                                      words({"warm", "sun"}),
                                      words({"cold", "water"})};
  const auto idx = TfIdfIndex::build(docs);
  CHECK(idx.n_docs() == 3);
  CHECK(idx.doc_freq("cold") == 2);
  CHECK(idx.doc_freq("wind") == 1);
  CHECK(idx.idf("cold") == doctest::Approx(std::log(3.0 / 2.0)).epsilon(1e-12));
  CHECK(idx.weight("wind", 2) == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
  const double norm0 = std::sqrt(std::pow(std::log(3.0 / 2.0), 2) +
                                 std::pow(2.0 * std::log(3.0), 2));
  CHECK(idx.doc_norm(0) == doctest::Approx(norm0).epsilon(1e-12));
}

TEST_CASE("identical query returns that document with similarity 1") {
  const std::vector<TokenSeq> docs = {words({"cold", "wind", "knife"}),
                                      words({"warm", "sun", "beach"}),
                                      words({"cold", "water", "night"})};
  const auto idx = TfIdfIndex::build(docs);
  const auto hit = idx.retrieve_top1(words({"warm", "sun", "beach"}));
  REQUIRE(hit.has_value());
  CHECK(hit->doc_id == 1);
  CHECK(hit->score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("queries with no informative overlap return nothing") {
  const std::vector<TokenSeq> docs = {words({"cold", "wind"}), words({"warm", "sun"})};
  const auto idx = TfIdfIndex::build(docs);
  CHECK_FALSE(idx.retrieve_top1(words({"moon", "stone"})).has_value());
}

TEST_CASE("toy ranking matches exhaustive cosine computation") {
  const std::vector<TokenSeq> docs = {words({"cold", "wind", "knife"}),
                                      words({"warm", "sun", "beach"}),
                                      words({"cold", "water", "night"})};
  const auto idx = TfIdfIndex::build(docs);
  const BruteForce oracle(docs);
  const TokenSeq query = words({"cold", "knife"});
  const auto fast = idx.retrieve_top1(query);
  const auto slow = oracle.top1(query);
  REQUIRE(fast.has_value());
  REQUIRE(slow.has_value());
  CHECK(fast->doc_id == slow->doc_id);
  CHECK(fast->score == doctest::Approx(slow->score).epsilon(1e-12));
}

TEST_CASE("index retrieval agrees with brute force on a random corpus") {
  Rng rng(2024);
  const std::vector<std::string> lexicon = {
      "cold", "warm", "wind", "sun",  "rain", "snow", "moon", "star",
      "lake", "hill", "bird", "tree", "leaf", "fire", "stone"};
  auto random_sentence = [&](int max_len) {
    TokenSeq s;
    const int len = 2 + static_cast<int>(rng.uniform_int(max_len - 2));
    for (int i = 0; i < len; ++i)
      s.push_back(lexicon[rng.uniform_int(lexicon.size())]);
    return s;
  };

  std::vector<TokenSeq> docs;
  for (int i = 0; i < 300; ++i) docs.push_back(random_sentence(8));
  const auto idx = TfIdfIndex::build(docs);
  const BruteForce oracle(docs);

  for (int q = 0; q < 50; ++q) {
    const TokenSeq query = random_sentence(6);
    const auto fast = idx.retrieve_top1(query);
    const auto slow = oracle.top1(query);
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) {
      CHECK(fast->doc_id == slow->doc_id);
      CHECK(fast->score == doctest::Approx(slow->score).epsilon(1e-9));
    }
  }
}

TEST_CASE("ties break toward the lowest document id") {
  // two identical documents: both have cosine 1 against their own text
  const std::vector<TokenSeq> docs = {words({"cold", "wind"}), words({"cold", "wind"}),
                                      words({"warm", "sun"})};
  const auto idx = TfIdfIndex::build(docs);
  const auto hit = idx.retrieve_top1(words({"cold", "wind"}));
  REQUIRE(hit.has_value());
  CHECK(hit->doc_id == 0);
}

TEST_CASE("cosine similarity is symmetric between identical multisets") {
  const std::vector<TokenSeq> docs = {words({"cold", "cold", "wind"}),
                                      words({"warm", "sun"})};
  const auto idx = TfIdfIndex::build(docs);
  const auto hit = idx.retrieve_top1(words({"wind", "cold", "cold"}));
  REQUIRE(hit.has_value());
  CHECK(hit->doc_id == 0);
  CHECK(hit->score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("index construction is insertion-order independent") {
  std::vector<TokenSeq> docs = {words({"cold", "wind"}), words({"warm", "sun"}),
                                words({"cold", "night"})};
  const auto idx = TfIdfIndex::build(docs);
  // rebuilding from the same documents gives identical retrievals
  const auto idx2 = TfIdfIndex::build(docs);
  const auto h1 = idx.retrieve_top1(words({"cold"}));
  const auto h2 = idx2.retrieve_top1(words({"cold"}));
  REQUIRE(h1.has_value());
  REQUIRE(h2.has_value());
  CHECK(h1->doc_id == h2->doc_id);
  CHECK(h1->score == h2->score);
}

TEST_CASE("index files round trip") {
  namespace fs = std::filesystem;
  const std::vector<TokenSeq> docs = {words({"cold", "wind", "wind"}),
                                      words({"warm", "sun"})};
  const auto idx = TfIdfIndex::build(docs);
  const std::string path = (fs::temp_directory_path() / "cpls_index_test.txt").string();
  idx.save(path);
  const auto loaded = TfIdfIndex::load(path);
  CHECK(loaded.n_docs() == idx.n_docs());
  CHECK(loaded.idf("wind") == doctest::Approx(idx.idf("wind")).epsilon(1e-15));
  CHECK(loaded.doc_norm(0) == doctest::Approx(idx.doc_norm(0)).epsilon(1e-15));
  const auto hit = loaded.retrieve_top1(words({"wind"}));
  REQUIRE(hit.has_value());
  CHECK(hit->doc_id == 0);
  fs::remove(path);
}

TEST_CASE("pseudo-parallel construction: size bound, orientation, dedupe") {
  corpus::SynthConfig sc;
  sc.n_parallel = 2;
  sc.n_valid = 1;
  sc.n_test = 1;
  sc.n_nonparallel = 120;
  const auto data = corpus::synth_styles(sc);

  const auto index_a = TfIdfIndex::build(data.pool_a.sentences);
  const auto index_b = TfIdfIndex::build(data.pool_b.sentences);
  Rng rng(5);
  const size_t per_side = 60;
  const auto pseudo = build_pseudo_parallel(index_a, index_b, data.pool_a.sentences,
                                            data.pool_b.sentences, per_side, rng);

  CHECK(pseudo.pairs.pairs.size() <= 2 * per_side);
  CHECK(pseudo.pairs.pairs.size() + pseudo.dropped_no_hit + pseudo.dropped_dupes ==
        2 * per_side);
  CHECK(pseudo.scores.size() == pseudo.pairs.pairs.size());
  for (double s : pseudo.scores) {
    CHECK(s > 0.0);
    CHECK(s <= 1.0 + 1e-12);
  }

  // orientation: the left side always comes from pool A's vocabulary
  std::set<std::string> a_vocab;
  for (const auto& s : data.pool_a.sentences) a_vocab.insert(s.begin(), s.end());
  for (const auto& [a, b] : pseudo.pairs.pairs)
    for (const auto& tok : a) CHECK(a_vocab.count(tok));

  // no duplicate (query, retrieved) pairs survive
  std::set<std::string> seen;
  for (const auto& [a, b] : pseudo.pairs.pairs) {
    std::string key = corpus::detokenize(a, corpus::TokenMode::Word) + "\t" +
                      corpus::detokenize(b, corpus::TokenMode::Word);
    CHECK_FALSE(seen.count(key));
    seen.insert(key);
  }
}
