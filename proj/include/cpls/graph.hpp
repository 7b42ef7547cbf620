#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cpls/rng.hpp"
#include "cpls/tensor.hpp"

namespace cpls {

// Reverse-mode tape. Every op computes its forward result and, while
// recording and when some input requires grad, appends a node whose closure
// scatters the output gradient back to the inputs. One backward pass consumes
// the tape; the graph is cleared between steps.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  size_t node_count() const { return tape_.size(); }
  void clear() { tape_.clear(); }

  // ---- linear algebra ----
  Tensor matmul(const Tensor& a, const Tensor& b);

  // ---- arithmetic, all elementwise unless noted ----
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor add_rowvec(const Tensor& a, const Tensor& bias);   // bias: rank-1 [cols]
  Tensor mul_colvec(const Tensor& a, const Tensor& col);    // col: [rows x 1]
  Tensor scale(const Tensor& a, double alpha);
  Tensor add_constmat(const Tensor& a, const std::vector<double>& c);  // c constant

  // ---- shape ----
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor slice_cols(const Tensor& a, int lo, int hi);

  // ---- nonlinearities ----
  Tensor sigmoid(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor relu(const Tensor& a);
  Tensor softmax(const Tensor& a);      // rowwise
  Tensor log_softmax(const Tensor& a);  // rowwise

  // ---- gather / stochastic ----
  Tensor embedding(const Tensor& table, std::span<const int> ids);
  Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train);

  // ---- reductions / losses ----
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  // -sum_r mask[r] * logp[r, ids[r]]; caller divides by the token count
  Tensor pick_nll(const Tensor& logp, std::span<const int> ids,
                  std::span<const double> mask);
  Tensor sq_dist(const Tensor& a, const Tensor& b);          // sum (a-b)^2
  Tensor euclidean_rows_mean(const Tensor& a, const Tensor& b);  // mean_i ||a_i-b_i||
  Tensor rowwise_dot(const Tensor& a, const Tensor& b);      // [rows x 1]

  // ---- recurrence / conv helpers ----
  // out row i = mask[i] ? fresh row i : prev row i
  Tensor mask_rows(const Tensor& fresh, const Tensor& prev,
                   const std::vector<double>& mask);
  // x: [T x D], w: [(width*D) x F]  ->  [(T-width+1) x F], valid convolution
  Tensor conv1d(const Tensor& x, const Tensor& w, int width);
  Tensor max_rows(const Tensor& a);  // [T x F] -> [1 x F], max over time

  Tensor detach(const Tensor& a);

  // Dynamic dispatch over the operation set; unary/binary tensor-only kinds.
  // Unknown kind -> ContractError (unsupported operation).
  Tensor apply(const std::string& kind, const std::vector<Tensor>& inputs);

  // Runs the closures in reverse order, seeding d(loss)/d(loss) = 1.
  // Throws ContractError for a non-scalar loss or an empty tape.
  void backward(const Tensor& loss);

 private:
  void record(const Tensor& out, std::function<void()> back);
  static bool needs_grad(std::initializer_list<Tensor> ins);

  struct Node {
    std::shared_ptr<TensorData> out;
    std::function<void()> back;
  };
  std::vector<Node> tape_;
  bool recording_ = true;
};

// Max over all checked coordinates of |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-8), central differences with step eps.
// The closure must produce a scalar and be deterministic across calls.
double grad_check(
    const std::function<Tensor(Graph&, std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double eps);

// Named gradient-check cases covering every differentiable operation plus
// composites; used by the CLI `gradcheck` command and the test suites.
struct GradCheckCase {
  std::string name;
  // builds fresh random inputs and the closure for one trial
  std::function<double(uint64_t seed)> run;  // returns max relative error
};
std::vector<GradCheckCase> builtin_grad_checks();

}  // namespace cpls
