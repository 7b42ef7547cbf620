#include "cpls/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cpls/error.hpp"

namespace cpls::corpus {

// -------------------------------------------------------------- tokenization

TokenMode token_mode_from_string(const std::string& s) {
  if (s == "char") return TokenMode::Char;
  if (s == "word") return TokenMode::Word;
  throw DataError("unknown token mode '" + s + "' (expected char|word)");
}

std::string to_string(TokenMode m) { return m == TokenMode::Char ? "char" : "word"; }

namespace {

// decodes one UTF-8 code point starting at i; returns its byte length
size_t utf8_len(const std::string& s, size_t i) {
  const unsigned char c = static_cast<unsigned char>(s[i]);
  size_t len;
  if (c < 0x80)
    len = 1;
  else if ((c >> 5) == 0x6)
    len = 2;
  else if ((c >> 4) == 0xe)
    len = 3;
  else if ((c >> 3) == 0x1e)
    len = 4;
  else
    throw DataError("invalid UTF-8 byte at offset " + std::to_string(i));
  if (i + len > s.size())
    throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
  for (size_t j = 1; j < len; ++j)
    if ((static_cast<unsigned char>(s[i + j]) >> 6) != 0x2)
      throw DataError("invalid UTF-8 continuation at offset " + std::to_string(i + j));
  return len;
}

bool is_space_token(const std::string& cp) {
  if (cp == "\xe3\x80\x80") return true;  // U+3000 ideographic space
  return cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0]));
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) && c != '\'';
}

}  // namespace

TokenSeq tokenize(const std::string& text, TokenMode mode) {
  // split into validated code points first
  std::vector<std::string> cps;
  for (size_t i = 0; i < text.size();) {
    const size_t len = utf8_len(text, i);
    cps.push_back(text.substr(i, len));
    i += len;
  }

  TokenSeq out;
  if (mode == TokenMode::Char) {
    for (auto& cp : cps)
      if (!is_space_token(cp)) out.push_back(cp);
    return out;
  }

  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (auto& cp : cps) {
    if (is_space_token(cp)) {
      flush();
    } else if (cp.size() == 1 && is_ascii_punct(cp[0])) {
      flush();
      out.push_back(cp);
    } else {
      word += cp;
    }
  }
  flush();
  return out;
}

std::string detokenize(const TokenSeq& tokens, TokenMode mode) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (mode == TokenMode::Word && i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<s>", "</s>", "<unk>"};
  freqs_ = {0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) ids_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<const std::vector<TokenSeq>*>& sources,
                             int min_freq) {
  std::unordered_map<std::string, long long> counts;
  size_t n_sentences = 0;
  for (const auto* src : sources) {
    n_sentences += src->size();
    for (const auto& sent : *src)
      for (const auto& tok : sent) ++counts[tok];
  }
  if (n_sentences == 0)
    throw ContractError("build_vocab: no sentences provided");

  std::vector<std::pair<std::string, long long>> kept;
  kept.reserve(counts.size());
  for (auto& [tok, freq] : counts)
    if (freq >= min_freq) kept.emplace_back(tok, freq);
  std::sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;  // lexicographic tie-break
  });

  Vocabulary v;
  for (auto& [tok, freq] : kept) {
    v.ids_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
    v.freqs_.push_back(freq);
  }
  return v;
}

int Vocabulary::encode_token(const std::string& tok) const {
  auto it = ids_.find(tok);
  return it == ids_.end() ? kUnk : it->second;
}

IdSeq Vocabulary::encode(const TokenSeq& tokens, size_t* unk_count) const {
  IdSeq out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const int id = encode_token(tok);
    if (id == kUnk && unk_count) ++*unk_count;
    out.push_back(id);
  }
  return out;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= size())
    throw ContractError("vocabulary id out of range: " + std::to_string(id));
  return tokens_[id];
}

TokenSeq Vocabulary::decode(const IdSeq& ids) const {
  TokenSeq out;
  for (int id : ids)
    if (id > kUnk)
      out.push_back(decode(id));
    else if (id == kUnk)
      out.push_back(tokens_[kUnk]);
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write vocabulary: " + path);
  for (int i = 4; i < size(); ++i) os << tokens_[i] << '\t' << freqs_[i] << '\n';
  if (!os) throw DataError("vocabulary write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("malformed vocabulary line: " + line);
    const std::string tok = line.substr(0, tab);
    v.ids_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
    v.freqs_.push_back(std::stoll(line.substr(tab + 1)));
  }
  return v;
}

// ------------------------------------------------------------------- corpora

ParallelCorpus encode_parallel(const RawParallel& raw, const Vocabulary& vocab,
                               const std::string& split, EncodeStats* stats) {
  ParallelCorpus out;
  out.split = split;
  size_t unk = 0;
  for (const auto& [a, b] : raw.pairs) {
    if (stats) stats->tokens += a.size() + b.size();
    out.pairs.emplace_back(vocab.encode(a, &unk), vocab.encode(b, &unk));
  }
  if (stats) stats->unknown += unk;
  return out;
}

NonparallelCorpus encode_pool(const RawPool& raw, const Vocabulary& vocab,
                              const std::string& style, EncodeStats* stats) {
  NonparallelCorpus out;
  out.style = style;
  size_t unk = 0;
  for (const auto& sent : raw.sentences) {
    if (stats) stats->tokens += sent.size();
    out.sentences.push_back(vocab.encode(sent, &unk));
  }
  if (stats) stats->unknown += unk;
  return out;
}

RawPool length_filter(const RawPool& pool, int min_len, int max_len) {
  if (min_len <= 0 || min_len > max_len)
    throw ContractError("length_filter: invalid bounds");
  RawPool out;
  for (const auto& s : pool.sentences) {
    const int n = static_cast<int>(s.size());
    if (n >= min_len && n <= max_len) out.sentences.push_back(s);
  }
  return out;
}

RawParallel length_filter(const RawParallel& corpus, int min_a, int max_a, int min_b,
                          int max_b) {
  if (min_a <= 0 || min_a > max_a || min_b <= 0 || min_b > max_b)
    throw ContractError("length_filter: invalid bounds");
  RawParallel out;
  for (const auto& [a, b] : corpus.pairs) {
    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    if (na >= min_a && na <= max_a && nb >= min_b && nb <= max_b)
      out.pairs.emplace_back(a, b);
  }
  return out;
}

// ----------------------------------------------------------------------- io

RawPool load_pool(const std::string& path, TokenMode mode) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open corpus file: " + path);
  RawPool out;
  std::string line;
  while (std::getline(is, line)) {
    TokenSeq toks = tokenize(line, mode);
    if (!toks.empty()) out.sentences.push_back(std::move(toks));
  }
  return out;
}

void save_pool(const RawPool& pool, TokenMode mode, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write corpus file: " + path);
  for (const auto& s : pool.sentences) os << detokenize(s, mode) << '\n';
  if (!os) throw DataError("corpus write failed: " + path);
}

RawParallel load_parallel(const std::string& path, TokenMode mode_a, TokenMode mode_b) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open parallel file: " + path);
  RawParallel out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected tab-separated pair");
    const auto tab2 = line.find('\t', tab + 1);  // optional score column ignored
    const std::string right = tab2 == std::string::npos
                                  ? line.substr(tab + 1)
                                  : line.substr(tab + 1, tab2 - tab - 1);
    TokenSeq a = tokenize(line.substr(0, tab), mode_a);
    TokenSeq b = tokenize(right, mode_b);
    if (a.empty() || b.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": empty side in pair");
    out.pairs.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

void save_parallel(const RawParallel& corpus, TokenMode mode_a, TokenMode mode_b,
                   const std::string& path, const std::vector<double>* scores) {
  if (scores && scores->size() != corpus.pairs.size())
    throw ContractError("save_parallel: score column length mismatch");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write parallel file: " + path);
  for (size_t i = 0; i < corpus.pairs.size(); ++i) {
    os << detokenize(corpus.pairs[i].first, mode_a) << '\t'
       << detokenize(corpus.pairs[i].second, mode_b);
    if (scores) os << '\t' << (*scores)[i];
    os << '\n';
  }
  if (!os) throw DataError("parallel write failed: " + path);
}

// ------------------------------------------------------------------ batching

std::vector<int> Batch::column(int t) const {
  std::vector<int> out(size);
  for (int b = 0; b < size; ++b) out[b] = id_at(b, t);
  return out;
}

std::vector<double> Batch::column_mask(int t) const {
  std::vector<double> out(size);
  for (int b = 0; b < size; ++b) out[b] = mask[static_cast<size_t>(b) * max_len + t];
  return out;
}

Batch make_batch(std::span<const IdSeq> sentences, bool append_eos) {
  if (sentences.empty()) throw ContractError("make_batch: empty batch");
  Batch batch;
  batch.size = static_cast<int>(sentences.size());
  const int extra = append_eos ? 1 : 0;
  for (const auto& s : sentences) {
    if (s.empty()) throw ContractError("make_batch: empty sentence");
    batch.max_len = std::max(batch.max_len, static_cast<int>(s.size()) + extra);
  }
  batch.ids.assign(static_cast<size_t>(batch.size) * batch.max_len, Vocabulary::kPad);
  batch.mask.assign(batch.ids.size(), 0.0);
  for (int b = 0; b < batch.size; ++b) {
    const auto& s = sentences[b];
    const int len = static_cast<int>(s.size()) + extra;
    batch.lengths.push_back(len);
    for (int t = 0; t < static_cast<int>(s.size()); ++t) {
      batch.ids[static_cast<size_t>(b) * batch.max_len + t] = s[t];
      batch.mask[static_cast<size_t>(b) * batch.max_len + t] = 1.0;
    }
    if (append_eos) {
      batch.ids[static_cast<size_t>(b) * batch.max_len + s.size()] = Vocabulary::kEos;
      batch.mask[static_cast<size_t>(b) * batch.max_len + s.size()] = 1.0;
    }
  }
  return batch;
}

std::vector<IdSeq> unbatch(const Batch& batch) {
  std::vector<IdSeq> out;
  for (int b = 0; b < batch.size; ++b) {
    IdSeq s;
    for (int t = 0; t < batch.lengths[b]; ++t) {
      const int id = batch.id_at(b, t);
      if (id == Vocabulary::kEos) break;
      s.push_back(id);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<size_t>> batch_order(size_t n, size_t batch_size, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<size_t>> out;
  for (size_t i = 0; i < n; i += batch_size) {
    std::vector<size_t> group;
    for (size_t j = i; j < std::min(n, i + batch_size); ++j) group.push_back(idx[j]);
    out.push_back(std::move(group));
  }
  return out;
}

// ---------------------------------------------------------------- synthetic

namespace {

struct Lexicon {
  std::vector<std::string> adj_a, adj_b;
  std::vector<std::string> noun_a, noun_b;
  std::vector<std::string> verb_a, verb_b;
  std::vector<std::string> adv_a, adv_b;
  std::vector<std::string> function;

  enum class Pos { Adj, Noun, Verb, Adv, Function };
  std::unordered_map<std::string, std::string> a_to_b, b_to_a;
  std::unordered_map<std::string, Pos> pos_a, pos_b;

  Lexicon() {
    adj_a = {"cold", "warm", "dark", "bright", "soft", "silent", "old", "young",
             "deep", "pale", "wild", "calm", "red", "white", "green", "hollow"};
    adj_b = {"frigus", "calidus", "obscurus", "clarus", "mollis", "tacitus",
             "vetus", "novus", "altus", "pallidus", "ferus", "placidus",
             "ruber", "albus", "viridis", "cavus"};
    noun_a = {"wind", "river", "moon",  "stone",  "bird",   "cloud", "rain",
              "tree", "fire",  "snow",  "lake",   "star",   "sky",   "night",
              "sun",  "leaf",  "storm", "shadow", "flower", "hill"};
    noun_b = {"ventus", "fluvius", "luna",     "saxum", "avis",   "nubes", "pluvia",
              "arbor",  "ignis",   "nix",      "lacus", "stella", "caelum", "nox",
              "sol",    "folium",  "procella", "umbra", "flos",   "collis"};
    verb_a = {"cuts",    "warms", "sees",  "calls",   "holds", "breaks",
              "meets",   "follows", "fills", "crosses", "finds", "leaves"};
    verb_b = {"secat",    "fovet",    "videt",  "vocat",   "tenet",   "frangit",
              "convenit", "sequitur", "implet", "transit", "invenit", "relinquit"};
    adv_a = {"slowly", "gently", "alone", "again", "tonight", "forever", "quietly", "far"};
    adv_b = {"lente", "leniter", "solus", "iterum", "nocte", "semper", "quiete", "procul"};
    function = {"the", "a", "and", "."};

    auto link = [&](const std::vector<std::string>& xa,
                    const std::vector<std::string>& xb, Pos pos) {
      for (size_t i = 0; i < xa.size(); ++i) {
        a_to_b[xa[i]] = xb[i];
        b_to_a[xb[i]] = xa[i];
        pos_a[xa[i]] = pos;
        pos_b[xb[i]] = pos;
      }
    };
    link(adj_a, adj_b, Pos::Adj);
    link(noun_a, noun_b, Pos::Noun);
    link(verb_a, verb_b, Pos::Verb);
    link(adv_a, adv_b, Pos::Adv);
    for (const auto& f : function) {
      pos_a[f] = Pos::Function;
      pos_b[f] = Pos::Function;
    }
  }
};

const Lexicon& lexicon() {
  static const Lexicon lex;
  return lex;
}

// index into a capped word list, optionally Zipf-skewed
size_t pick_word(Rng& rng, size_t n, bool zipf) {
  if (!zipf) return rng.uniform_int(n);
  // p(i) proportional to 1/(i+2)
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) total += 1.0 / double(i + 2);
  double u = rng.uniform() * total;
  for (size_t i = 0; i < n; ++i) {
    u -= 1.0 / double(i + 2);
    if (u <= 0.0) return i;
  }
  return n - 1;
}

TokenSeq sample_np(const SynthConfig& cfg, Rng& rng) {
  const auto& lex = lexicon();
  TokenSeq np;
  np.push_back(rng.uniform() < 0.7 ? "the" : "a");
  if (rng.uniform() < cfg.p_adj)
    np.push_back(lex.adj_a[pick_word(rng, cfg.n_adj, cfg.zipf)]);
  np.push_back(lex.noun_a[pick_word(rng, cfg.n_noun, cfg.zipf)]);
  return np;
}

TokenSeq sample_clause(const SynthConfig& cfg, Rng& rng) {
  const auto& lex = lexicon();
  TokenSeq s = sample_np(cfg, rng);
  s.push_back(lex.verb_a[pick_word(rng, cfg.n_verb, cfg.zipf)]);
  const double kind = rng.uniform();
  if (kind < 0.55) {
    for (auto& t : sample_np(cfg, rng)) s.push_back(t);
  } else if (kind < 0.8) {
    for (auto& t : sample_np(cfg, rng)) s.push_back(t);
    s.push_back(lex.adv_a[pick_word(rng, cfg.n_adv, cfg.zipf)]);
  } else {
    s.push_back(lex.adv_a[pick_word(rng, cfg.n_adv, cfg.zipf)]);
  }
  return s;
}

TokenSeq sample_sentence_a(const SynthConfig& cfg, Rng& rng) {
  TokenSeq s = sample_clause(cfg, rng);
  if (rng.uniform() < cfg.p_coord) {
    s.push_back("and");
    for (auto& t : sample_clause(cfg, rng)) s.push_back(t);
  }
  s.push_back(".");
  return s;
}

std::string join_tokens(const TokenSeq& s) {
  std::string out;
  for (const auto& t : s) {
    out += t;
    out += '\x1f';
  }
  return out;
}

}  // namespace

const std::vector<std::string>& synth_function_words() { return lexicon().function; }

TokenSeq synth_a_to_b(const TokenSeq& a) {
  const auto& lex = lexicon();
  // substitute content words, keep function words
  TokenSeq sub;
  sub.reserve(a.size());
  for (const auto& tok : a) {
    auto it = lex.a_to_b.find(tok);
    sub.push_back(it == lex.a_to_b.end() ? tok : it->second);
  }
  // swap each adjacent (adjective, noun) pair
  TokenSeq out;
  for (size_t i = 0; i < sub.size();) {
    auto pi = lex.pos_b.find(sub[i]);
    if (i + 1 < sub.size() && pi != lex.pos_b.end() && pi->second == Lexicon::Pos::Adj) {
      auto pj = lex.pos_b.find(sub[i + 1]);
      if (pj != lex.pos_b.end() && pj->second == Lexicon::Pos::Noun) {
        out.push_back(sub[i + 1]);
        out.push_back(sub[i]);
        i += 2;
        continue;
      }
    }
    out.push_back(sub[i]);
    ++i;
  }
  return out;
}

TokenSeq synth_b_to_a(const TokenSeq& b) {
  const auto& lex = lexicon();
  // undo the reorder: a (noun, adjective) pair on the B side is a swap
  TokenSeq unswapped;
  for (size_t i = 0; i < b.size();) {
    auto pi = lex.pos_b.find(b[i]);
    if (i + 1 < b.size() && pi != lex.pos_b.end() && pi->second == Lexicon::Pos::Noun) {
      auto pj = lex.pos_b.find(b[i + 1]);
      if (pj != lex.pos_b.end() && pj->second == Lexicon::Pos::Adj) {
        unswapped.push_back(b[i + 1]);
        unswapped.push_back(b[i]);
        i += 2;
        continue;
      }
    }
    unswapped.push_back(b[i]);
    ++i;
  }
  TokenSeq out;
  out.reserve(unswapped.size());
  for (const auto& tok : unswapped) {
    auto it = lex.b_to_a.find(tok);
    out.push_back(it == lex.b_to_a.end() ? tok : it->second);
  }
  return out;
}

SynthData synth_styles(const SynthConfig& cfg) {
  if (cfg.n_parallel < 1 || cfg.n_nonparallel < 1)
    throw ContractError("synth_styles: sizes must be >= 1");
  const auto& lex = lexicon();
  SynthConfig c = cfg;
  c.n_adj = std::min<int>(c.n_adj, static_cast<int>(lex.adj_a.size()));
  c.n_noun = std::min<int>(c.n_noun, static_cast<int>(lex.noun_a.size()));
  c.n_verb = std::min<int>(c.n_verb, static_cast<int>(lex.verb_a.size()));
  c.n_adv = std::min<int>(c.n_adv, static_cast<int>(lex.adv_a.size()));

  Rng rng(c.seed);
  SynthData data;
  data.function_words = lex.function;

  // parallel splits: test/valid sentences never collide with train sentences
  std::unordered_set<std::string> train_keys, heldout_keys;
  auto fill_parallel = [&](RawParallel& dst, int n, bool heldout) {
    int guard = 0;
    while (static_cast<int>(dst.pairs.size()) < n && guard < n * 200) {
      ++guard;
      TokenSeq a = sample_sentence_a(c, rng);
      const std::string key = join_tokens(a);
      if (heldout) {
        if (train_keys.count(key) || heldout_keys.count(key)) continue;
        heldout_keys.insert(key);
      } else {
        if (heldout_keys.count(key)) continue;
        train_keys.insert(key);
      }
      dst.pairs.emplace_back(a, synth_a_to_b(a));
    }
    if (static_cast<int>(dst.pairs.size()) < n)
      throw ContractError("synth_styles: grammar too small for requested split sizes");
  };
  fill_parallel(data.train, c.n_parallel, false);
  fill_parallel(data.valid, c.n_valid, true);
  fill_parallel(data.test, c.n_test, true);

  // unaligned pools: independent draws per style
  for (int i = 0; i < c.n_nonparallel; ++i)
    data.pool_a.sentences.push_back(sample_sentence_a(c, rng));
  for (int i = 0; i < c.n_nonparallel; ++i)
    data.pool_b.sentences.push_back(synth_a_to_b(sample_sentence_a(c, rng)));
  const int n_pool_valid = std::max(10, c.n_nonparallel / 50);
  for (int i = 0; i < n_pool_valid; ++i)
    data.pool_a_valid.sentences.push_back(sample_sentence_a(c, rng));
  for (int i = 0; i < n_pool_valid; ++i)
    data.pool_b_valid.sentences.push_back(synth_a_to_b(sample_sentence_a(c, rng)));

  return data;
}

}  // namespace cpls::corpus
