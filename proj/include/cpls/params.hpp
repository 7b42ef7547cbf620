#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cpls/rng.hpp"
#include "cpls/tensor.hpp"

namespace cpls {

struct Parameter {
  std::string name;  // hierarchical path, e.g. enc_a.fwd.w_ih
  Tensor value;      // requires_grad = true
};

// Owns trainable parameters in registration order. Names are unique and
// shapes immutable after creation, so the checkpoint layout is a function of
// the construction code alone.
class ParamStore {
 public:
  Tensor add(const std::string& name, std::vector<int> shape);
  Tensor add_uniform(const std::string& name, std::vector<int> shape, Rng& rng,
                     double lo, double hi);

  bool has(const std::string& name) const;
  Tensor get(const std::string& name) const;
  const std::vector<Parameter>& all() const { return params_; }
  size_t count() const { return params_.size(); }
  size_t value_count() const;

  // Gradient snapshot, name -> tensor; parameters the last backward never
  // reached map to zero tensors.
  std::map<std::string, Tensor> gradients() const;

  void zero_grads();
  double grad_norm(const std::function<bool(const std::string&)>& pick = nullptr) const;

  // value <- value - lr * grad, after optional global norm clipping
  // (clip <= 0 disables). Gradients are zeroed afterwards. A NaN/Inf gradient
  // aborts with a diagnostic naming the parameter.
  void sgd_step(double lr, double clip,
                const std::function<bool(const std::string&)>& pick = nullptr);

  // checkpoint file: u32 version, u32 count, then per parameter
  // u32 name_len, name bytes, u32 rank, u32 dims[rank], f64 values.
  // Round trips are bit-exact.
  void save(const std::string& path) const;
  // restores into an already-constructed store; names and shapes must match
  void load(const std::string& path);
  static ParamStore read_file(const std::string& path);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

}  // namespace cpls
