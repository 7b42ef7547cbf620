#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpls/corpus.hpp"
#include "cpls/graph.hpp"
#include "cpls/params.hpp"

namespace cpls::nn {

using corpus::Batch;
using corpus::IdSeq;

struct DropoutCfg {
  double rate = 0.0;
  bool train = false;
  Rng* rng = nullptr;
};

inline Tensor maybe_dropout(Graph& g, const Tensor& x, const DropoutCfg& d) {
  if (!d.train || d.rate == 0.0 || d.rng == nullptr) return x;
  return g.dropout(x, d.rate, *d.rng, true);
}

// --------------------------------------------------------------- embeddings

struct EmbeddingTable {
  int vocab_size = 0;
  int dim = 0;
  Tensor weights;  // vocab x dim, row 0 is padding

  EmbeddingTable() = default;
  EmbeddingTable(ParamStore& store, const std::string& prefix, int vocab, int dim,
                 Rng& rng);

  Tensor lookup(Graph& g, std::span<const int> ids) const;

  // optional hook: plain-text "word v1 .. vd" lines; returns rows loaded
  size_t load_pretrained_text(const std::string& path,
                              const corpus::Vocabulary& vocab);
};

// --------------------------------------------------------------------- lstm

// one step of the gate arithmetic; weights packed [i f g o] along columns
std::pair<Tensor, Tensor> lstm_step(Graph& g, const Tensor& x, const Tensor& h,
                                    const Tensor& c, const Tensor& w_ih,
                                    const Tensor& w_hh, const Tensor& bias);

struct LstmCell {
  int input_dim = 0;
  int hidden = 0;
  Tensor w_ih, w_hh, bias;

  LstmCell() = default;
  LstmCell(ParamStore& store, const std::string& prefix, int input_dim, int hidden,
           Rng& rng);

  std::pair<Tensor, Tensor> step(Graph& g, const Tensor& x, const Tensor& h,
                                 const Tensor& c) const {
    return lstm_step(g, x, h, c, w_ih, w_hh, bias);
  }
};

// ------------------------------------------------------------------ encoder

struct EncodeResult {
  Tensor latent;               // B x 2d
  std::vector<Tensor> states;  // per time step, B x 2d (forward;backward)
};

struct BiLstmEncoder {
  int hidden = 0;
  LstmCell fwd, bwd;

  BiLstmEncoder() = default;
  BiLstmEncoder(ParamStore& store, const std::string& prefix, int embed_dim,
                int hidden, Rng& rng);

  // latent = [forward final ; backward final], width exactly 2d
  Tensor encode(Graph& g, const EmbeddingTable& embed, const Batch& batch,
                const DropoutCfg& drop) const;
  EncodeResult encode_with_states(Graph& g, const EmbeddingTable& embed,
                                  const Batch& batch, const DropoutCfg& drop) const;
};

// ------------------------------------------------------------------ decoder

struct NllResult {
  Tensor loss;       // scalar mean NLL over non-padding positions
  long correct = 0;  // argmax matches under teacher forcing
  long total = 0;
};

struct LstmDecoder {
  int hidden = 0;
  int vocab = 0;
  int latent_dim = 0;
  bool latent_every_step = false;
  LstmCell cell;
  Tensor w_bridge, b_bridge;  // latent (2d) -> initial hidden (d)
  Tensor w_out, b_out;        // hidden -> vocab logits

  LstmDecoder() = default;
  LstmDecoder(ParamStore& store, const std::string& prefix, int embed_dim, int hidden,
              int latent_dim, int vocab, bool latent_every_step, Rng& rng);

  Tensor bridge(Graph& g, const Tensor& latent) const;

  // teacher forcing: gold previous token fed at each step; targets carry the
  // end marker and padding is excluded from the mean
  NllResult nll(Graph& g, const EmbeddingTable& embed, const Tensor& latent,
                const Batch& targets, const DropoutCfg& drop) const;

  IdSeq greedy(const EmbeddingTable& embed, const Tensor& latent, int max_len) const;
  IdSeq beam(const EmbeddingTable& embed, const Tensor& latent, int beam_width,
             int max_len) const;
};

// --------------------------------------------------------------- projection

struct Projection {
  std::string direction;  // "a2b" or "b2a"
  int width = 0;          // 2d
  bool two_layer = false;
  Tensor w1, b1, w2, b2;

  Projection() = default;
  Projection(ParamStore& store, const std::string& prefix, std::string direction,
             int width, bool two_layer, Rng& rng);

  // tanh(W x + v), latent space -> latent space
  Tensor apply(Graph& g, const Tensor& latent) const;
};

// --------------------------------------------------------------- corruption

// Bounded-displacement shuffle: each token moves at most k positions (uniform
// noise in [0,k] added to every index, stable sort by noisy index). The token
// multiset is preserved; k = 0 is the identity.
IdSeq corrupt(const IdSeq& sentence, int k, Rng& rng);

// ---------------------------------------------------------------- attention

struct AttendResult {
  Tensor context;  // B x 2d
  Tensor weights;  // B x T, rows sum to 1
};

// multiplicative scoring: score(s, h_i) = (s W_a) . h_i ; pad_bias, when
// given, is added to the B x T score matrix before the softmax
AttendResult attend(Graph& g, const Tensor& decoder_state,
                    const std::vector<Tensor>& encoder_states, const Tensor& w_att,
                    const std::vector<double>* pad_bias = nullptr);

struct AttentionS2S {
  int hidden = 0;
  int vocab = 0;
  EmbeddingTable embed;
  BiLstmEncoder enc;
  LstmCell dec_cell;
  Tensor w_bridge, b_bridge;
  Tensor w_att;         // d x 2d
  Tensor w_out, b_out;  // (d + 2d) -> vocab

  AttentionS2S() = default;
  AttentionS2S(ParamStore& store, const std::string& prefix, int vocab, int embed_dim,
               int hidden, Rng& rng);

  Tensor nll(Graph& g, const Batch& src, const Batch& tgt, const DropoutCfg& drop) const;
  IdSeq beam_decode(const IdSeq& src, int beam_width, int max_len) const;
};

// ----------------------------------------------------------------- decoding

// step: (previous token, state handle) -> log-probs over the vocabulary and a
// new state handle. Handles index caller-owned storage.
using DecodeStep =
    std::function<std::vector<double>(int prev_token, int state_in, int& state_out)>;

IdSeq greedy_decode(const DecodeStep& step, int init_state, int max_len);

// Returns the completed hypothesis with the highest length-normalized score
// (sum of log-probs / generated length). The greedy rollout is always among
// the candidates, so widening the beam never returns a worse-scoring output;
// beam 1 follows the greedy path exactly.
IdSeq beam_decode(const DecodeStep& step, int init_state, int beam_width, int max_len);

// gradient checks for the model compositions (one LSTM cell step with every
// parameter; encode -> project -> decode supervised loss on a tiny bundle)
std::vector<GradCheckCase> model_grad_checks();

}  // namespace cpls::nn
