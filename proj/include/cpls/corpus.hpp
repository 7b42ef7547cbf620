#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpls/rng.hpp"

namespace cpls::corpus {

using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<int>;

enum class TokenMode { Char, Word };

TokenMode token_mode_from_string(const std::string& s);
std::string to_string(TokenMode m);

// Char mode: one token per non-space code point. Word mode: whitespace split
// with ASCII punctuation isolated into single-character tokens (apostrophe
// counts as a word character). Invalid UTF-8 raises DataError.
TokenSeq tokenize(const std::string& text, TokenMode mode);
std::string detokenize(const TokenSeq& tokens, TokenMode mode);

// ----------------------------------------------------------------- vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  // Frequency-then-lexicographic id assignment over tokens with
  // frequency >= min_freq; reserved ids prepended. Throws ContractError when
  // the input holds no sentences.
  static Vocabulary build(const std::vector<const std::vector<TokenSeq>*>& sources,
                          int min_freq);

  int encode_token(const std::string& tok) const;  // kUnk when unseen
  IdSeq encode(const TokenSeq& tokens, size_t* unk_count = nullptr) const;
  const std::string& decode(int id) const;
  TokenSeq decode(const IdSeq& ids) const;  // specials skipped

  int size() const { return static_cast<int>(tokens_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  Vocabulary();
  std::vector<std::string> tokens_;
  std::vector<long long> freqs_;
  std::map<std::string, int> ids_;
};

// ------------------------------------------------------------------- corpora

struct RawParallel {
  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
};

struct RawPool {
  std::vector<TokenSeq> sentences;
};

struct ParallelCorpus {
  std::vector<std::pair<IdSeq, IdSeq>> pairs;
  std::string split;  // train / valid / test
};

struct NonparallelCorpus {
  std::string style;  // "a" or "b"
  std::vector<IdSeq> sentences;
};

struct EncodeStats {
  size_t tokens = 0;
  size_t unknown = 0;
  double unknown_rate() const { return tokens ? double(unknown) / double(tokens) : 0.0; }
};

ParallelCorpus encode_parallel(const RawParallel& raw, const Vocabulary& vocab,
                               const std::string& split, EncodeStats* stats = nullptr);
NonparallelCorpus encode_pool(const RawPool& raw, const Vocabulary& vocab,
                              const std::string& style, EncodeStats* stats = nullptr);

// Retains sentences with min_len <= length <= max_len; a pair is dropped when
// either side violates its style's bounds.
RawPool length_filter(const RawPool& pool, int min_len, int max_len);
RawParallel length_filter(const RawParallel& corpus, int min_a, int max_a, int min_b,
                          int max_b);

// ----------------------------------------------------------------------- io

// nonparallel file: one sentence per line
RawPool load_pool(const std::string& path, TokenMode mode);
void save_pool(const RawPool& pool, TokenMode mode, const std::string& path);

// parallel file: "styleA-sentence \t styleB-sentence" per line; an optional
// third column (e.g. a retrieval score) is preserved on save when provided
RawParallel load_parallel(const std::string& path, TokenMode mode_a, TokenMode mode_b);
void save_parallel(const RawParallel& corpus, TokenMode mode_a, TokenMode mode_b,
                   const std::string& path,
                   const std::vector<double>* scores = nullptr);

// ------------------------------------------------------------------ batching

struct Batch {
  int size = 0;
  int max_len = 0;
  std::vector<int> ids;       // row-major size x max_len, pad id 0
  std::vector<int> lengths;   // true lengths
  std::vector<double> mask;   // 1.0 inside a sentence, 0.0 on padding

  int id_at(int b, int t) const { return ids[static_cast<size_t>(b) * max_len + t]; }
  std::vector<int> column(int t) const;
  std::vector<double> column_mask(int t) const;
};

// append_eos adds the end marker to every sentence (decoder targets)
Batch make_batch(std::span<const IdSeq> sentences, bool append_eos);
std::vector<IdSeq> unbatch(const Batch& batch);  // strips padding and any eos

// deterministic epoch order: indices shuffled by the rng
std::vector<std::vector<size_t>> batch_order(size_t n, size_t batch_size, Rng& rng);

// ---------------------------------------------------------------- synthetic

// Two artificial styles linked by a bijective content-word substitution plus
// one local reorder (every adjective-noun pair flips on the B side), so every
// sentence has an exact gold counterpart and transfer quality is measurable.
struct SynthConfig {
  int n_parallel = 500;
  int n_valid = 100;
  int n_test = 200;
  int n_nonparallel = 5000;
  int n_adj = 16, n_noun = 20, n_verb = 12, n_adv = 8;
  double p_adj = 0.6, p_adv = 0.3, p_coord = 0.15;
  bool zipf = true;  // skew word choice so rare words live mostly in the pools
  uint64_t seed = 1;
};

struct SynthData {
  RawParallel train, valid, test;
  RawPool pool_a, pool_b;              // nonparallel training pools
  RawPool pool_a_valid, pool_b_valid;  // small held-out pools for DAE validation
  std::vector<std::string> function_words;
};

SynthData synth_styles(const SynthConfig& cfg);

// the underlying deterministic transform and its exact inverse
TokenSeq synth_a_to_b(const TokenSeq& a);
TokenSeq synth_b_to_a(const TokenSeq& b);
const std::vector<std::string>& synth_function_words();

}  // namespace cpls::corpus
