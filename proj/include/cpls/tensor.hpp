#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cpls/error.hpp"

namespace cpls {

// Dense row-major 64-bit float tensor participating in reverse-mode
// differentiation. Rank 1 and rank 2 cover everything in this codebase;
// scalars are rank-1 tensors of size 1. The handle is a cheap shared
// reference: ops never mutate an existing payload's values, only gradients
// accumulate in place.
struct TensorData {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same size as value
  bool requires_grad = false;

  size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData> p) : p_(std::move(p)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    auto d = std::make_shared<TensorData>();
    size_t n = 1;
    for (int s : shape) {
      if (s <= 0) throw ShapeError("tensor dimensions must be positive");
      n *= static_cast<size_t>(s);
    }
    d->shape = std::move(shape);
    d->value.assign(n, 0.0);
    d->requires_grad = requires_grad;
    return Tensor(d);
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (values.size() != t.size())
      throw ShapeError("tensor data length does not match shape product");
    t.data()->value = std::move(values);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(p_); }
  const std::shared_ptr<TensorData>& data() const { return p_; }

  const std::vector<int>& shape() const { return p_->shape; }
  int rank() const { return static_cast<int>(p_->shape.size()); }
  size_t size() const { return p_->size(); }
  bool is_scalar() const { return size() == 1; }

  int rows() const { return rank() == 2 ? p_->shape[0] : 1; }
  int cols() const { return rank() == 2 ? p_->shape[1] : p_->shape[0]; }

  std::vector<double>& values() { return p_->value; }
  const std::vector<double>& values() const { return p_->value; }
  std::vector<double>& grad() { return p_->grad; }
  const std::vector<double>& grad() const { return p_->grad; }

  double item() const {
    if (!is_scalar()) throw ContractError("item() requires a scalar tensor");
    return p_->value[0];
  }

  double at(int i, int j) const { return p_->value[static_cast<size_t>(i) * cols() + j]; }
  double& at(int i, int j) { return p_->value[static_cast<size_t>(i) * cols() + j]; }
  const double* row_ptr(int i) const { return &p_->value[static_cast<size_t>(i) * cols()]; }
  double* row_ptr(int i) { return &p_->value[static_cast<size_t>(i) * cols()]; }

  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool b) { p_->requires_grad = b; }

  // Value copy detached from the graph.
  Tensor clone_detached() const {
    auto d = std::make_shared<TensorData>();
    d->shape = p_->shape;
    d->value = p_->value;
    d->requires_grad = false;
    return Tensor(d);
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < p_->shape.size(); ++i) {
      if (i) os << 'x';
      os << p_->shape[i];
    }
    os << ']';
    return os.str();
  }

 private:
  std::shared_ptr<TensorData> p_;
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape();
}

}  // namespace cpls
