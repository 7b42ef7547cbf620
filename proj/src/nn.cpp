#include "cpls/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpls/error.hpp"

namespace cpls::nn {

using corpus::Vocabulary;

// --------------------------------------------------------------- embeddings

EmbeddingTable::EmbeddingTable(ParamStore& store, const std::string& prefix, int vocab,
                               int dim_, Rng& rng)
    : vocab_size(vocab), dim(dim_) {
  weights = store.add_uniform(prefix + ".weights", {vocab, dim_}, rng, -0.1, 0.1);
}

Tensor EmbeddingTable::lookup(Graph& g, std::span<const int> ids) const {
  return g.embedding(weights, ids);
}

size_t EmbeddingTable::load_pretrained_text(const std::string& path,
                                            const corpus::Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open embedding file: " + path);
  std::string line;
  size_t loaded = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    const int id = vocab.encode_token(word);
    if (id == Vocabulary::kUnk) continue;
    std::vector<double> row(dim);
    for (int j = 0; j < dim; ++j)
      if (!(ls >> row[j]))
        throw DataError("embedding row for '" + word + "' shorter than dim " +
                        std::to_string(dim));
    std::copy(row.begin(), row.end(), weights.row_ptr(id));
    ++loaded;
  }
  return loaded;
}

// --------------------------------------------------------------------- lstm

std::pair<Tensor, Tensor> lstm_step(Graph& g, const Tensor& x, const Tensor& h,
                                    const Tensor& c, const Tensor& w_ih,
                                    const Tensor& w_hh, const Tensor& bias) {
  const int d = h.cols();
  Tensor gates = g.add_rowvec(g.add(g.matmul(x, w_ih), g.matmul(h, w_hh)), bias);
  Tensor in = g.sigmoid(g.slice_cols(gates, 0, d));
  Tensor forget = g.sigmoid(g.slice_cols(gates, d, 2 * d));
  Tensor cand = g.tanh(g.slice_cols(gates, 2 * d, 3 * d));
  Tensor out = g.sigmoid(g.slice_cols(gates, 3 * d, 4 * d));
  Tensor c_new = g.add(g.mul(forget, c), g.mul(in, cand));
  Tensor h_new = g.mul(out, g.tanh(c_new));
  return {h_new, c_new};
}

LstmCell::LstmCell(ParamStore& store, const std::string& prefix, int input_dim_,
                   int hidden_, Rng& rng)
    : input_dim(input_dim_), hidden(hidden_) {
  w_ih = store.add_uniform(prefix + ".w_ih", {input_dim_, 4 * hidden_}, rng, -0.1, 0.1);
  w_hh = store.add_uniform(prefix + ".w_hh", {hidden_, 4 * hidden_}, rng, -0.1, 0.1);
  bias = store.add(prefix + ".bias", {4 * hidden_});
  // forget gate bias 1: keeps early cell state alive under lr=1 SGD
  for (int j = hidden_; j < 2 * hidden_; ++j) bias.values()[j] = 1.0;
}

// ------------------------------------------------------------------ encoder

BiLstmEncoder::BiLstmEncoder(ParamStore& store, const std::string& prefix,
                             int embed_dim, int hidden_, Rng& rng)
    : hidden(hidden_),
      fwd(store, prefix + ".fwd", embed_dim, hidden_, rng),
      bwd(store, prefix + ".bwd", embed_dim, hidden_, rng) {}

namespace {

// runs one direction over the batch; recurrence frozen on padding rows
Tensor run_direction(Graph& g, const LstmCell& cell, const EmbeddingTable& embed,
                     const Batch& batch, const DropoutCfg& drop, bool backward,
                     std::vector<Tensor>* states) {
  const int bsz = batch.size, d = cell.hidden;
  Tensor h = Tensor::zeros({bsz, d});
  Tensor c = Tensor::zeros({bsz, d});
  if (states) states->assign(batch.max_len, Tensor());
  for (int step = 0; step < batch.max_len; ++step) {
    const int t = backward ? batch.max_len - 1 - step : step;
    Tensor x = maybe_dropout(g, embed.lookup(g, batch.column(t)), drop);
    auto [h_new, c_new] = cell.step(g, x, h, c);
    const auto mask = batch.column_mask(t);
    h = g.mask_rows(h_new, h, mask);
    c = g.mask_rows(c_new, c, mask);
    if (states) (*states)[t] = h;
  }
  return h;
}

}  // namespace

Tensor BiLstmEncoder::encode(Graph& g, const EmbeddingTable& embed, const Batch& batch,
                             const DropoutCfg& drop) const {
  if (batch.size == 0) throw ContractError("encode: empty batch");
  Tensor hf = run_direction(g, fwd, embed, batch, drop, false, nullptr);
  Tensor hb = run_direction(g, bwd, embed, batch, drop, true, nullptr);
  return g.concat_cols(hf, hb);
}

EncodeResult BiLstmEncoder::encode_with_states(Graph& g, const EmbeddingTable& embed,
                                               const Batch& batch,
                                               const DropoutCfg& drop) const {
  if (batch.size == 0) throw ContractError("encode: empty batch");
  std::vector<Tensor> f_states, b_states;
  Tensor hf = run_direction(g, fwd, embed, batch, drop, false, &f_states);
  Tensor hb = run_direction(g, bwd, embed, batch, drop, true, &b_states);
  EncodeResult res;
  res.latent = g.concat_cols(hf, hb);
  res.states.reserve(batch.max_len);
  for (int t = 0; t < batch.max_len; ++t)
    res.states.push_back(g.concat_cols(f_states[t], b_states[t]));
  return res;
}

// ------------------------------------------------------------------ decoder

LstmDecoder::LstmDecoder(ParamStore& store, const std::string& prefix, int embed_dim,
                         int hidden_, int latent_dim_, int vocab_,
                         bool latent_every_step_, Rng& rng)
    : hidden(hidden_),
      vocab(vocab_),
      latent_dim(latent_dim_),
      latent_every_step(latent_every_step_),
      cell(store, prefix + ".cell",
           latent_every_step_ ? embed_dim + latent_dim_ : embed_dim, hidden_, rng) {
  w_bridge =
      store.add_uniform(prefix + ".w_bridge", {latent_dim_, hidden_}, rng, -0.1, 0.1);
  b_bridge = store.add(prefix + ".b_bridge", {hidden_});
  w_out = store.add_uniform(prefix + ".w_out", {hidden_, vocab_}, rng, -0.1, 0.1);
  b_out = store.add(prefix + ".b_out", {vocab_});
}

Tensor LstmDecoder::bridge(Graph& g, const Tensor& latent) const {
  if (latent.cols() != latent_dim)
    throw ShapeError("decoder bridge: latent width " + std::to_string(latent.cols()) +
                     " does not match expected " + std::to_string(latent_dim));
  return g.add_rowvec(g.matmul(latent, w_bridge), b_bridge);
}

NllResult LstmDecoder::nll(Graph& g, const EmbeddingTable& embed, const Tensor& latent,
                           const Batch& targets, const DropoutCfg& drop) const {
  const int bsz = targets.size;
  if (latent.rows() != bsz)
    throw ShapeError("decode_nll: latent rows " + std::to_string(latent.rows()) +
                     " vs batch " + std::to_string(bsz));
  Tensor h = bridge(g, latent);
  Tensor c = Tensor::zeros({bsz, hidden});

  NllResult res;
  Tensor total;
  long count = 0;
  std::vector<int> prev(bsz, Vocabulary::kBos);
  for (int t = 0; t < targets.max_len; ++t) {
    Tensor x = maybe_dropout(g, embed.lookup(g, prev), drop);
    if (latent_every_step) x = g.concat_cols(x, latent);
    auto [h_new, c_new] = cell.step(g, x, h, c);
    h = h_new;
    c = c_new;
    Tensor logits = g.add_rowvec(g.matmul(maybe_dropout(g, h, drop), w_out), b_out);
    Tensor logp = g.log_softmax(logits);
    const auto ids = targets.column(t);
    const auto mask = targets.column_mask(t);
    Tensor step_loss = g.pick_nll(logp, ids, mask);
    total = total.defined() ? g.add(total, step_loss) : step_loss;
    for (int b = 0; b < bsz; ++b) {
      if (mask[b] == 0.0) continue;
      ++count;
      const double* row = logp.row_ptr(b);
      int best = 0;
      for (int v = 1; v < vocab; ++v)
        if (row[v] > row[best]) best = v;
      if (best == ids[b]) ++res.correct;
    }
    prev = ids;  // gold token feeds the next step
  }
  res.total = count;
  res.loss = g.scale(total, 1.0 / static_cast<double>(std::max<long>(count, 1)));
  return res;
}

namespace {

// decoder step factory shared by greedy and beam inference; states are
// (h, c) pairs stored by handle
struct DecoderStepper {
  const LstmDecoder& dec;
  const EmbeddingTable& embed;
  Tensor latent;  // 1 x 2d
  std::vector<std::pair<Tensor, Tensor>> states;

  explicit DecoderStepper(const LstmDecoder& d, const EmbeddingTable& e,
                          const Tensor& lat)
      : dec(d), embed(e), latent(lat) {
    Graph g(false);
    states.emplace_back(dec.bridge(g, latent), Tensor::zeros({1, dec.hidden}));
  }

  std::vector<double> operator()(int prev_token, int state_in, int& state_out) {
    Graph g(false);
    const int ids[1] = {prev_token};
    Tensor x = embed.lookup(g, ids);
    if (dec.latent_every_step) x = g.concat_cols(x, latent);
    auto [h, c] = dec.cell.step(g, x, states[state_in].first, states[state_in].second);
    Tensor logits = g.add_rowvec(g.matmul(h, dec.w_out), dec.b_out);
    Tensor logp = g.log_softmax(logits);
    state_out = static_cast<int>(states.size());
    states.emplace_back(h, c);
    std::vector<double> lp = logp.values();
    forbid_specials(lp);
    return lp;
  }

  static void forbid_specials(std::vector<double>& lp) {
    // generation may end with eos but never emits padding or start markers
    lp[Vocabulary::kPad] = -1e30;
    lp[Vocabulary::kBos] = -1e30;
  }
};

}  // namespace

IdSeq LstmDecoder::greedy(const EmbeddingTable& embed, const Tensor& latent,
                          int max_len) const {
  DecoderStepper stepper(*this, embed, latent);
  return greedy_decode(std::ref(stepper), 0, max_len);
}

IdSeq LstmDecoder::beam(const EmbeddingTable& embed, const Tensor& latent,
                        int beam_width, int max_len) const {
  DecoderStepper stepper(*this, embed, latent);
  return beam_decode(std::ref(stepper), 0, beam_width, max_len);
}

// --------------------------------------------------------------- projection

Projection::Projection(ParamStore& store, const std::string& prefix,
                       std::string direction_, int width_, bool two_layer_, Rng& rng)
    : direction(std::move(direction_)), width(width_), two_layer(two_layer_) {
  w1 = store.add_uniform(prefix + ".w1", {width_, width_}, rng, -0.1, 0.1);
  b1 = store.add(prefix + ".b1", {width_});
  if (two_layer) {
    w2 = store.add_uniform(prefix + ".w2", {width_, width_}, rng, -0.1, 0.1);
    b2 = store.add(prefix + ".b2", {width_});
  }
}

Tensor Projection::apply(Graph& g, const Tensor& latent) const {
  if (latent.cols() != width)
    throw ShapeError("project: latent width " + std::to_string(latent.cols()) +
                     " does not match projection width " + std::to_string(width));
  Tensor out = g.tanh(g.add_rowvec(g.matmul(latent, w1), b1));
  if (two_layer) out = g.tanh(g.add_rowvec(g.matmul(out, w2), b2));
  return out;
}

// --------------------------------------------------------------- corruption

IdSeq corrupt(const IdSeq& sentence, int k, Rng& rng) {
  if (k < 0) throw ContractError("corrupt: displacement limit must be >= 0");
  const size_t n = sentence.size();
  std::vector<double> keys(n);
  for (size_t i = 0; i < n; ++i) keys[i] = static_cast<double>(i) + rng.uniform() * k;
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return keys[x] < keys[y]; });
  IdSeq out(n);
  for (size_t i = 0; i < n; ++i) out[i] = sentence[order[i]];
  return out;
}

// ---------------------------------------------------------------- attention

AttendResult attend(Graph& g, const Tensor& decoder_state,
                    const std::vector<Tensor>& encoder_states, const Tensor& w_att,
                    const std::vector<double>* pad_bias) {
  if (encoder_states.empty())
    throw ContractError("attend: empty encoder state sequence");
  Tensor query = g.matmul(decoder_state, w_att);  // B x 2d
  Tensor scores;
  for (const auto& state : encoder_states) {
    Tensor s = g.rowwise_dot(query, state);  // B x 1
    scores = scores.defined() ? g.concat_cols(scores, s) : s;
  }
  if (pad_bias) scores = g.add_constmat(scores, *pad_bias);
  Tensor weights = g.softmax(scores);  // B x T
  Tensor context;
  for (size_t i = 0; i < encoder_states.size(); ++i) {
    Tensor wi = g.slice_cols(weights, static_cast<int>(i), static_cast<int>(i) + 1);
    Tensor term = g.mul_colvec(encoder_states[i], wi);
    context = context.defined() ? g.add(context, term) : term;
  }
  return {context, weights};
}

AttentionS2S::AttentionS2S(ParamStore& store, const std::string& prefix, int vocab_,
                           int embed_dim, int hidden_, Rng& rng)
    : hidden(hidden_),
      vocab(vocab_),
      embed(store, prefix + ".embed", vocab_, embed_dim, rng),
      enc(store, prefix + ".enc", embed_dim, hidden_, rng),
      dec_cell(store, prefix + ".dec.cell", embed_dim, hidden_, rng) {
  w_bridge =
      store.add_uniform(prefix + ".dec.w_bridge", {2 * hidden_, hidden_}, rng, -0.1, 0.1);
  b_bridge = store.add(prefix + ".dec.b_bridge", {hidden_});
  w_att = store.add_uniform(prefix + ".dec.w_att", {hidden_, 2 * hidden_}, rng, -0.1, 0.1);
  w_out = store.add_uniform(prefix + ".dec.w_out", {3 * hidden_, vocab_}, rng, -0.1, 0.1);
  b_out = store.add(prefix + ".dec.b_out", {vocab_});
}

namespace {

// additive mask turning padded positions into -1e9 scores
std::vector<double> attention_pad_bias(const Batch& src) {
  std::vector<double> bias(static_cast<size_t>(src.size) * src.max_len, 0.0);
  for (int b = 0; b < src.size; ++b)
    for (int t = 0; t < src.max_len; ++t)
      if (src.mask[static_cast<size_t>(b) * src.max_len + t] == 0.0)
        bias[static_cast<size_t>(b) * src.max_len + t] = -1e9;
  return bias;
}

}  // namespace

Tensor AttentionS2S::nll(Graph& g, const Batch& src, const Batch& tgt,
                         const DropoutCfg& drop) const {
  EncodeResult encres = enc.encode_with_states(g, embed, src, drop);
  const auto bias = attention_pad_bias(src);
  const int bsz = src.size;
  Tensor h = g.add_rowvec(g.matmul(encres.latent, w_bridge), b_bridge);
  Tensor c = Tensor::zeros({bsz, hidden});

  Tensor total;
  long count = 0;
  std::vector<int> prev(bsz, Vocabulary::kBos);
  for (int t = 0; t < tgt.max_len; ++t) {
    Tensor x = maybe_dropout(g, embed.lookup(g, prev), drop);
    auto [h_new, c_new] = dec_cell.step(g, x, h, c);
    h = h_new;
    c = c_new;
    AttendResult att = attend(g, h, encres.states, w_att, &bias);
    Tensor comb = maybe_dropout(g, g.concat_cols(h, att.context), drop);
    Tensor logp = g.log_softmax(g.add_rowvec(g.matmul(comb, w_out), b_out));
    const auto ids = tgt.column(t);
    const auto mask = tgt.column_mask(t);
    Tensor step_loss = g.pick_nll(logp, ids, mask);
    total = total.defined() ? g.add(total, step_loss) : step_loss;
    for (double m : mask) count += m != 0.0;
    prev = ids;
  }
  return g.scale(total, 1.0 / static_cast<double>(std::max<long>(count, 1)));
}

IdSeq AttentionS2S::beam_decode(const IdSeq& src, int beam_width, int max_len) const {
  if (src.empty()) throw ContractError("beam_decode: empty source sentence");
  Graph g(false);
  const IdSeq srcs[1] = {src};
  Batch batch = corpus::make_batch(srcs, false);
  EncodeResult encres = enc.encode_with_states(g, embed, batch, {});

  std::vector<std::pair<Tensor, Tensor>> states;
  states.emplace_back(g.add_rowvec(g.matmul(encres.latent, w_bridge), b_bridge),
                      Tensor::zeros({1, hidden}));

  auto step = [&](int prev_token, int state_in, int& state_out) {
    Graph sg(false);
    const int ids[1] = {prev_token};
    Tensor x = embed.lookup(sg, ids);
    auto [h, c] = dec_cell.step(sg, x, states[state_in].first, states[state_in].second);
    AttendResult att = attend(sg, h, encres.states, w_att, nullptr);
    Tensor comb = sg.concat_cols(h, att.context);
    Tensor logp = sg.log_softmax(sg.add_rowvec(sg.matmul(comb, w_out), b_out));
    state_out = static_cast<int>(states.size());
    states.emplace_back(h, c);
    std::vector<double> lp = logp.values();
    lp[Vocabulary::kPad] = -1e30;
    lp[Vocabulary::kBos] = -1e30;
    return lp;
  };
  return nn::beam_decode(DecodeStep(step), 0, beam_width, max_len);
}

// ----------------------------------------------------------------- decoding

IdSeq greedy_decode(const DecodeStep& step, int init_state, int max_len) {
  if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
  IdSeq out;
  int state = init_state;
  int prev = Vocabulary::kBos;
  for (int t = 0; t < max_len; ++t) {
    int next_state = state;
    const auto logp = step(prev, state, next_state);
    int best = 0;
    for (size_t v = 1; v < logp.size(); ++v)
      if (logp[v] > logp[best]) best = static_cast<int>(v);
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
    state = next_state;
  }
  return out;
}

namespace {

struct Hypothesis {
  IdSeq tokens;  // generated tokens, eos excluded
  double logp = 0.0;
  int state = 0;

  // length includes the end marker when one was generated
  double normalized(bool finished) const {
    const double len = static_cast<double>(tokens.size()) + (finished ? 1.0 : 0.0);
    return logp / std::max(1.0, len);
  }
};

bool better(double score_x, const IdSeq& x, double score_y, const IdSeq& y) {
  if (score_x != score_y) return score_x > score_y;
  return x < y;  // deterministic tie-break
}

}  // namespace

IdSeq beam_decode(const DecodeStep& step, int init_state, int beam_width, int max_len) {
  if (beam_width < 1) throw ContractError("beam_decode: beam width must be >= 1");
  if (max_len < 1) throw ContractError("beam_decode: max_len must be >= 1");

  std::vector<Hypothesis> live{{{}, 0.0, init_state}};
  IdSeq best_tokens;
  double best_score = -1e300;
  bool have_best = false;
  auto offer = [&](const IdSeq& tokens, double score) {
    if (!have_best || better(score, tokens, best_score, best_tokens)) {
      best_tokens = tokens;
      best_score = score;
      have_best = true;
    }
  };

  for (int t = 0; t < max_len && !live.empty(); ++t) {
    struct Cand {
      double logp;
      size_t hyp;
      int token;
      int state;
    };
    std::vector<Cand> cands;
    for (size_t hi = 0; hi < live.size(); ++hi) {
      const int prev = live[hi].tokens.empty() ? Vocabulary::kBos : live[hi].tokens.back();
      int next_state = live[hi].state;
      const auto logp = step(prev, live[hi].state, next_state);
      for (size_t v = 0; v < logp.size(); ++v)
        cands.push_back({live[hi].logp + logp[v], hi, static_cast<int>(v), next_state});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.logp != y.logp) return x.logp > y.logp;
      if (x.hyp != y.hyp) return x.hyp < y.hyp;
      return x.token < y.token;
    });

    // completed hypotheses consume beam slots, so beam 1 is exactly greedy
    std::vector<Hypothesis> next;
    int slots = 0;
    for (const auto& cand : cands) {
      if (slots >= beam_width) break;
      ++slots;
      Hypothesis hyp = live[cand.hyp];
      hyp.logp = cand.logp;
      hyp.state = cand.state;
      if (cand.token == Vocabulary::kEos) {
        offer(hyp.tokens, hyp.normalized(true));
      } else {
        hyp.tokens.push_back(cand.token);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }
  for (const auto& hyp : live) offer(hyp.tokens, hyp.normalized(false));

  // greedy rollout is always a candidate: a wider beam can then never return
  // a hypothesis scoring below the greedy one
  {
    IdSeq tokens;
    double logp = 0.0;
    int state = init_state;
    int prev = Vocabulary::kBos;
    bool finished = false;
    for (int t = 0; t < max_len; ++t) {
      int next_state = state;
      const auto lp = step(prev, state, next_state);
      int best = 0;
      for (size_t v = 1; v < lp.size(); ++v)
        if (lp[v] > lp[best]) best = static_cast<int>(v);
      logp += lp[best];
      if (best == Vocabulary::kEos) {
        finished = true;
        break;
      }
      tokens.push_back(best);
      prev = best;
      state = next_state;
    }
    Hypothesis greedy{tokens, logp, 0};
    offer(greedy.tokens, greedy.normalized(finished));
  }

  return best_tokens;
}

// ------------------------------------------------------------- grad checks

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape, double lo = -0.5, double hi = 0.5) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

std::vector<GradCheckCase> model_grad_checks() {
  std::vector<GradCheckCase> cases;

  cases.push_back({"lstm_cell", [](uint64_t seed) {
    // one cell step, gradients for every parameter and both states
    Rng rng(seed);
    const int e = 3, d = 4, bsz = 2;
    Tensor w = rand_tensor(rng, {bsz, d}, -1.0, 1.0);
    std::vector<Tensor> in{
        rand_tensor(rng, {bsz, e}),      rand_tensor(rng, {bsz, d}),
        rand_tensor(rng, {bsz, d}),      rand_tensor(rng, {e, 4 * d}),
        rand_tensor(rng, {d, 4 * d}),    rand_tensor(rng, {4 * d}),
    };
    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          auto [h, c] = lstm_step(g, t[0], t[1], t[2], t[3], t[4], t[5]);
          return g.sum(g.mul(g.concat_cols(h, c), g.concat_cols(w, w)));
        },
        in, 1e-5);
  }});

  cases.push_back({"encode_project_decode", [](uint64_t seed) {
    // full supervised loss on a tiny bundle: distance + NLL through the
    // projection, every parameter differentiated
    Rng rng(seed);
    const int e = 3, d = 2, vocab = 5;
    ParamStore store;
    Rng init(seed ^ 0x1234);
    EmbeddingTable emb_a(store, "emb_a", vocab, e, init);
    EmbeddingTable emb_b(store, "emb_b", vocab, e, init);
    BiLstmEncoder enc_a(store, "enc_a", e, d, init);
    BiLstmEncoder enc_b(store, "enc_b", e, d, init);
    LstmDecoder dec_b(store, "dec_b", e, d, 2 * d, vocab, false, init);
    Projection f(store, "f", "a2b", 2 * d, false, init);

    const IdSeq sent_a{4, 3, 4};
    const IdSeq sent_b{3, 4};
    const IdSeq a_arr[1] = {sent_a};
    const IdSeq b_arr[1] = {sent_b};
    Batch batch_a = corpus::make_batch(a_arr, false);
    Batch batch_b_src = corpus::make_batch(b_arr, false);
    Batch batch_b_tgt = corpus::make_batch(b_arr, true);

    // randomize all values at a healthy scale: coordinates with microscopic
    // true gradients would otherwise drown in finite-difference noise
    std::vector<Tensor> in;
    for (const auto& p : store.all()) {
      Tensor t = p.value.clone_detached();
      for (auto& v : t.values()) v = rng.uniform(-0.8, 0.8);
      in.push_back(t);
    }

    return grad_check(
        [&](Graph& g, std::vector<Tensor>& t) {
          // rebind the cloned tensors onto lightweight module copies, in
          // registration order
          EmbeddingTable ea = emb_a;  ea.weights = t[0];
          EmbeddingTable eb = emb_b;  eb.weights = t[1];
          BiLstmEncoder ca = enc_a;
          ca.fwd.w_ih = t[2]; ca.fwd.w_hh = t[3]; ca.fwd.bias = t[4];
          ca.bwd.w_ih = t[5]; ca.bwd.w_hh = t[6]; ca.bwd.bias = t[7];
          BiLstmEncoder cb = enc_b;
          cb.fwd.w_ih = t[8]; cb.fwd.w_hh = t[9]; cb.fwd.bias = t[10];
          cb.bwd.w_ih = t[11]; cb.bwd.w_hh = t[12]; cb.bwd.bias = t[13];
          LstmDecoder db = dec_b;
          db.cell.w_ih = t[14]; db.cell.w_hh = t[15]; db.cell.bias = t[16];
          db.w_bridge = t[17]; db.b_bridge = t[18];
          db.w_out = t[19]; db.b_out = t[20];
          Projection pf = f;
          pf.w1 = t[21]; pf.b1 = t[22];

          Tensor c_a = ca.encode(g, ea, batch_a, {});
          Tensor c_b = cb.encode(g, eb, batch_b_src, {});
          Tensor proj = pf.apply(g, c_a);
          Tensor dist = g.euclidean_rows_mean(proj, c_b);
          Tensor nll = db.nll(g, eb, proj, batch_b_tgt, {}).loss;
          return g.add(dist, nll);
        },
        in, 5e-4);
  }});

  return cases;
}

}  // namespace cpls::nn
