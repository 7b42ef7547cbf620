#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "cpls/corpus.hpp"
#include "cpls/error.hpp"

using namespace cpls;
using namespace cpls::corpus;

TEST_CASE("char mode splits per code point and drops spaces") {
  CHECK(tokenize("水寒", TokenMode::Char) == TokenSeq{"水", "寒"});
  CHECK(tokenize("水 寒风", TokenMode::Char) == TokenSeq{"水", "寒", "风"});
  CHECK(tokenize("", TokenMode::Char).empty());
}

TEST_CASE("word mode splits whitespace and isolates punctuation") {
  CHECK(tokenize("give them a chance.", TokenMode::Word) ==
        TokenSeq{"give", "them", "a", "chance", "."});
  CHECK(tokenize("well-known, right?", TokenMode::Word) ==
        TokenSeq{"well", "-", "known", ",", "right", "?"});
  CHECK(tokenize("can't stop", TokenMode::Word) == TokenSeq{"can't", "stop"});
  CHECK(tokenize("", TokenMode::Word).empty());
}

TEST_CASE("invalid utf-8 raises a data error") {
  CHECK_THROWS_AS(tokenize("\xff\xfe", TokenMode::Char), DataError);
  CHECK_THROWS_AS(tokenize("ok \xc3", TokenMode::Word), DataError);  // truncated
}

TEST_CASE("tokenize after detokenize is the identity on token sequences") {
  Rng rng(42);
  const std::vector<std::string> texts = {
      "the cold wind cuts the stone .", "give them a chance.",
      "寒 风 吹 过", "a b c d e f g"};
  for (auto mode : {TokenMode::Word, TokenMode::Char}) {
    for (const auto& text : texts) {
      const TokenSeq toks = tokenize(text, mode);
      CHECK(tokenize(detokenize(toks, mode), mode) == toks);
    }
  }
  // property over random synthetic sentences
  SynthConfig sc;
  sc.n_parallel = 30;
  sc.n_valid = 1;
  sc.n_test = 1;
  sc.n_nonparallel = 1;
  const auto data = synth_styles(sc);
  for (const auto& [a, b] : data.train.pairs) {
    CHECK(tokenize(detokenize(a, TokenMode::Word), TokenMode::Word) == a);
    CHECK(tokenize(detokenize(b, TokenMode::Word), TokenMode::Word) == b);
  }
}

TEST_CASE("length filter keeps exactly the in-bounds sentences") {
  RawPool pool;
  pool.sentences = {{"a"}, {"a", "b"}, {"a", "b", "c"}, {"a", "b", "c", "d"}};
  const RawPool kept = length_filter(pool, 3, 30);
  REQUIRE(kept.sentences.size() == 2);
  CHECK(kept.sentences[0].size() == 3);

  const RawPool all = length_filter(pool, 1, 1000000);
  CHECK(all.sentences.size() == pool.sentences.size());

  RawParallel par;
  par.pairs = {{{"x", "y", "z", "w", "v"}, {"long", "enough", "words", "here", "too"}},
               {{"x"}, {"long", "enough", "words", "here", "too"}}};
  const RawParallel kept_pairs = length_filter(par, 5, 30, 5, 30);
  CHECK(kept_pairs.pairs.size() == 1);  // pair dropped when either side fails

  CHECK_THROWS_AS(length_filter(pool, 0, 3), ContractError);
}

TEST_CASE("vocabulary: frequency order, ties lexicographic, min_freq, unknowns") {
  std::vector<TokenSeq> corpus = {{"a", "b"}, {"a"}};
  Vocabulary v = Vocabulary::build({&corpus}, 1);
  CHECK(v.encode_token("a") == 4);  // most frequent right after the reserved ids
  CHECK(v.encode_token("b") == 5);
  CHECK(v.encode_token("zzz") == Vocabulary::kUnk);

  Vocabulary strict = Vocabulary::build({&corpus}, 2);
  CHECK(strict.encode_token("a") == 4);
  CHECK(strict.encode_token("b") == Vocabulary::kUnk);
  CHECK(strict.size() == 5);

  std::vector<TokenSeq> tied = {{"beta", "alpha"}};
  Vocabulary vt = Vocabulary::build({&tied}, 1);
  CHECK(vt.encode_token("alpha") == 4);  // tie broken lexicographically
  CHECK(vt.encode_token("beta") == 5);

  std::vector<TokenSeq> empty;
  CHECK_THROWS_AS(Vocabulary::build({&empty}, 1), ContractError);
}

TEST_CASE("vocabulary id assignment is deterministic and survives file io") {
  SynthConfig sc;
  sc.n_parallel = 50;
  sc.n_nonparallel = 50;
  const auto data = synth_styles(sc);
  Vocabulary v1 = Vocabulary::build({&data.pool_a.sentences, &data.pool_b.sentences}, 1);
  Vocabulary v2 = Vocabulary::build({&data.pool_a.sentences, &data.pool_b.sentences}, 1);
  REQUIRE(v1.size() == v2.size());
  for (int id = 4; id < v1.size(); ++id) CHECK(v1.decode(id) == v2.decode(id));

  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "cpls_vocab_test.txt").string();
  v1.save(path);
  Vocabulary v3 = Vocabulary::load(path);
  REQUIRE(v3.size() == v1.size());
  for (int id = 0; id < v1.size(); ++id) CHECK(v3.decode(id) == v1.decode(id));
  fs::remove(path);
}

TEST_CASE("batching then unbatching recovers the sentences exactly") {
  std::vector<IdSeq> sents = {{5, 6, 7}, {8}, {9, 10, 11, 12, 13}, {4, 4}};
  for (bool eos : {false, true}) {
    Batch batch = make_batch(sents, eos);
    CHECK(batch.size == 4);
    CHECK(batch.max_len == 5 + (eos ? 1 : 0));
    const auto back = unbatch(batch);
    CHECK(back == sents);
  }
  CHECK_THROWS_AS(make_batch(std::vector<IdSeq>{}, false), ContractError);
  CHECK_THROWS_AS(make_batch(std::vector<IdSeq>{{}}, false), ContractError);
}

TEST_CASE("batch padding and masks are consistent with true lengths") {
  std::vector<IdSeq> sents = {{5, 6}, {7, 8, 9}};
  Batch b = make_batch(sents, true);
  for (int row = 0; row < b.size; ++row)
    for (int t = 0; t < b.max_len; ++t) {
      const bool inside = t < b.lengths[row];
      CHECK(b.mask[row * b.max_len + t] == (inside ? 1.0 : 0.0));
      if (!inside) CHECK(b.id_at(row, t) == Vocabulary::kPad);
    }
}

TEST_CASE("parallel and pool files round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();

  RawParallel par;
  par.pairs = {{{"cold", "wind"}, {"ventus", "frigus"}},
               {{"the", "moon", "."}, {"luna", "the", "."}}};
  const std::string ppath = (dir / "cpls_par_test.tsv").string();
  save_parallel(par, TokenMode::Word, TokenMode::Word, ppath);
  const RawParallel loaded = load_parallel(ppath, TokenMode::Word, TokenMode::Word);
  CHECK(loaded.pairs == par.pairs);

  const std::vector<double> scores = {0.5, 0.25};
  save_parallel(par, TokenMode::Word, TokenMode::Word, ppath, &scores);
  const RawParallel with_scores = load_parallel(ppath, TokenMode::Word, TokenMode::Word);
  CHECK(with_scores.pairs == par.pairs);  // third column tolerated on load

  RawPool pool;
  pool.sentences = {{"a", "cold", "wind"}, {"luna", "."}};
  const std::string lpath = (dir / "cpls_pool_test.txt").string();
  save_pool(pool, TokenMode::Word, lpath);
  CHECK(load_pool(lpath, TokenMode::Word).sentences == pool.sentences);

  CHECK_THROWS_AS(load_pool((dir / "cpls_missing_file.txt").string(), TokenMode::Word),
                  DataError);
  fs::remove(ppath);
  fs::remove(lpath);
}

TEST_CASE("style transform is invertible and substitutes every content token") {
  SynthConfig sc;
  sc.n_parallel = 60;
  sc.n_nonparallel = 5;
  const auto data = synth_styles(sc);
  const auto& fn = synth_function_words();
  const std::set<std::string> function_set(fn.begin(), fn.end());

  for (const auto& [a, b] : data.train.pairs) {
    CHECK(synth_b_to_a(b) == a);  // exact inverse
    CHECK(synth_a_to_b(a) == b);
    // multisets have equal sizes and differ on every substituted token
    REQUIRE(a.size() == b.size());
    const std::multiset<std::string> sa(a.begin(), a.end());
    for (const auto& tok : b)
      if (!function_set.count(tok)) CHECK(sa.count(tok) == 0);
  }
}

TEST_CASE("pool vocabulary overlap is exactly the declared function words") {
  SynthConfig sc;
  sc.n_parallel = 2;
  sc.n_valid = 1;
  sc.n_test = 1;
  sc.n_nonparallel = 2000;
  const auto data = synth_styles(sc);

  std::set<std::string> vocab_a, vocab_b;
  for (const auto& s : data.pool_a.sentences) vocab_a.insert(s.begin(), s.end());
  for (const auto& s : data.pool_b.sentences) vocab_b.insert(s.begin(), s.end());
  std::set<std::string> overlap;
  std::set_intersection(vocab_a.begin(), vocab_a.end(), vocab_b.begin(), vocab_b.end(),
                        std::inserter(overlap, overlap.begin()));
  const auto& fn = data.function_words;
  CHECK(overlap == std::set<std::string>(fn.begin(), fn.end()));
}

TEST_CASE("synthetic splits are sized as requested and test stays held out") {
  SynthConfig sc;
  sc.n_parallel = 40;
  sc.n_valid = 10;
  sc.n_test = 15;
  sc.n_nonparallel = 30;
  const auto data = synth_styles(sc);
  CHECK(data.train.pairs.size() == 40);
  CHECK(data.valid.pairs.size() == 10);
  CHECK(data.test.pairs.size() == 15);
  CHECK(data.pool_a.sentences.size() == 30);
  CHECK(data.pool_b.sentences.size() == 30);

  std::set<std::string> train_keys;
  for (const auto& [a, b] : data.train.pairs)
    train_keys.insert(detokenize(a, TokenMode::Word));
  for (const auto& [a, b] : data.test.pairs)
    CHECK_FALSE(train_keys.count(detokenize(a, TokenMode::Word)));
}
