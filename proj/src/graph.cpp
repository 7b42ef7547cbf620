#include "cpls/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cpls/kernels.hpp"

namespace cpls {

namespace {

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

Tensor make_out(std::vector<int> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

}  // namespace

bool Graph::needs_grad(std::initializer_list<Tensor> ins) {
  for (const auto& t : ins)
    if (t.requires_grad()) return true;
  return false;
}

void Graph::record(const Tensor& out, std::function<void()> back) {
  if (!recording_ || !out.requires_grad()) return;
  tape_.push_back({out.data(), std::move(back)});
}

// ------------------------------------------------------------------ matmul

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_out({m, n}, recording_ && needs_grad({a, b}));
  kern::matmul_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);

  record(out, [a, b, out, m, k, n]() {
    const double* g = out.grad().data();
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      std::vector<double> da(static_cast<size_t>(m) * k);
      kern::matmul_nt(g, b.values().data(), da.data(), m, n, k);
      kern::axpy(1.0, da.data(), a.data()->grad.data(), da.size());
    }
    if (b.requires_grad()) {
      b.data()->ensure_grad();
      std::vector<double> db(static_cast<size_t>(k) * n);
      kern::matmul_tn(a.values().data(), g, db.data(), m, k, n);
      kern::axpy(1.0, db.data(), b.data()->grad.data(), db.size());
    }
  });
  return out;
}

// -------------------------------------------------------------- arithmetic

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_out(a.shape(), recording_ && needs_grad({a, b}));
  kern::vadd(a.values().data(), b.values().data(), out.values().data(), a.size());
  record(out, [a, b, out]() {
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      kern::axpy(1.0, out.grad().data(), a.data()->grad.data(), a.size());
    }
    if (b.requires_grad()) {
      b.data()->ensure_grad();
      kern::axpy(1.0, out.grad().data(), b.data()->grad.data(), b.size());
    }
  });
  return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_out(a.shape(), recording_ && needs_grad({a, b}));
  for (size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  record(out, [a, b, out]() {
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      kern::axpy(1.0, out.grad().data(), a.data()->grad.data(), a.size());
    }
    if (b.requires_grad()) {
      b.data()->ensure_grad();
      kern::axpy(-1.0, out.grad().data(), b.data()->grad.data(), b.size());
    }
  });
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_out(a.shape(), recording_ && needs_grad({a, b}));
  kern::vmul(a.values().data(), b.values().data(), out.values().data(), a.size());
  record(out, [a, b, out]() {
    const double* g = out.grad().data();
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      double* da = a.data()->grad.data();
      const double* bv = b.values().data();
      for (size_t i = 0; i < a.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      b.data()->ensure_grad();
      double* db = b.data()->grad.data();
      const double* av = a.values().data();
      for (size_t i = 0; i < b.size(); ++i) db[i] += g[i] * av[i];
    }
  });
  return out;
}

Tensor Graph::add_rowvec(const Tensor& a, const Tensor& bias) {
  check_rank2(a, "add_rowvec");
  if (bias.rank() != 1 || bias.cols() != a.cols())
    throw ShapeError("add_rowvec: shape mismatch " + a.shape_str() + " vs " +
                     bias.shape_str());
  const int m = a.rows(), n = a.cols();
  Tensor out = make_out({m, n}, recording_ && needs_grad({a, bias}));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + bias.values()[j];
  record(out, [a, bias, out, m, n]() {
    const double* g = out.grad().data();
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      kern::axpy(1.0, g, a.data()->grad.data(), a.size());
    }
    if (bias.requires_grad()) {
      bias.data()->ensure_grad();
      double* db = bias.data()->grad.data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) db[j] += g[static_cast<size_t>(i) * n + j];
    }
  });
  return out;
}

Tensor Graph::mul_colvec(const Tensor& a, const Tensor& col) {
  check_rank2(a, "mul_colvec");
  if (col.rank() != 2 || col.cols() != 1 || col.rows() != a.rows())
    throw ShapeError("mul_colvec: shape mismatch " + a.shape_str() + " vs " +
                     col.shape_str());
  const int m = a.rows(), n = a.cols();
  Tensor out = make_out({m, n}, recording_ && needs_grad({a, col}));
  for (int i = 0; i < m; ++i) {
    const double c = col.values()[i];
    for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) * c;
  }
  record(out, [a, col, out, m, n]() {
    const double* g = out.grad().data();
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      double* da = a.data()->grad.data();
      for (int i = 0; i < m; ++i) {
        const double c = col.values()[i];
        for (int j = 0; j < n; ++j) da[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(i) * n + j] * c;
      }
    }
    if (col.requires_grad()) {
      col.data()->ensure_grad();
      double* dc = col.data()->grad.data();
      for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          s += g[static_cast<size_t>(i) * n + j] * a.at(i, j);
        dc[i] += s;
      }
    }
  });
  return out;
}

Tensor Graph::scale(const Tensor& a, double alpha) {
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  for (size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * alpha;
  record(out, [a, out, alpha]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    kern::axpy(alpha, out.grad().data(), a.data()->grad.data(), a.size());
  });
  return out;
}

Tensor Graph::add_constmat(const Tensor& a, const std::vector<double>& c) {
  if (c.size() != a.size())
    throw ShapeError("add_constmat: constant length does not match " + a.shape_str());
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  kern::vadd(a.values().data(), c.data(), out.values().data(), a.size());
  record(out, [a, out]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    kern::axpy(1.0, out.grad().data(), a.data()->grad.data(), a.size());
  });
  return out;
}

// ------------------------------------------------------------------- shape

Tensor Graph::concat_cols(const Tensor& a, const Tensor& b) {
  check_rank2(a, "concat");
  check_rank2(b, "concat");
  if (a.rows() != b.rows())
    throw ShapeError("concat: row mismatch " + a.shape_str() + " vs " + b.shape_str());
  const int m = a.rows(), na = a.cols(), nb = b.cols();
  Tensor out = make_out({m, na + nb}, recording_ && needs_grad({a, b}));
  for (int i = 0; i < m; ++i) {
    std::memcpy(out.row_ptr(i), a.row_ptr(i), sizeof(double) * na);
    std::memcpy(&out.at(i, na), b.row_ptr(i), sizeof(double) * nb);
  }
  record(out, [a, b, out, m, na, nb]() {
    if (a.requires_grad()) {
      a.data()->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < na; ++j)
          a.data()->grad[static_cast<size_t>(i) * na + j] +=
              out.grad()[static_cast<size_t>(i) * (na + nb) + j];
    }
    if (b.requires_grad()) {
      b.data()->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < nb; ++j)
          b.data()->grad[static_cast<size_t>(i) * nb + j] +=
              out.grad()[static_cast<size_t>(i) * (na + nb) + na + j];
    }
  });
  return out;
}

Tensor Graph::slice_cols(const Tensor& a, int lo, int hi) {
  check_rank2(a, "slice");
  if (lo < 0 || hi > a.cols() || lo >= hi)
    throw ShapeError("slice: bounds [" + std::to_string(lo) + "," + std::to_string(hi) +
                     ") invalid for " + a.shape_str());
  const int m = a.rows(), n = a.cols(), w = hi - lo;
  Tensor out = make_out({m, w}, recording_ && a.requires_grad());
  for (int i = 0; i < m; ++i)
    std::memcpy(out.row_ptr(i), &a.values()[static_cast<size_t>(i) * n + lo], sizeof(double) * w);
  record(out, [a, out, m, n, lo, w]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        a.data()->grad[static_cast<size_t>(i) * n + lo + j] +=
            out.grad()[static_cast<size_t>(i) * w + j];
  });
  return out;
}

// --------------------------------------------------------- nonlinearities

Tensor Graph::sigmoid(const Tensor& a) {
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  kern::vsigmoid(a.values().data(), out.values().data(), a.size());
  record(out, [a, out]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    double* da = a.data()->grad.data();
    const double* y = out.values().data();
    const double* g = out.grad().data();
    for (size_t i = 0; i < a.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

Tensor Graph::tanh(const Tensor& a) {
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  kern::vtanh(a.values().data(), out.values().data(), a.size());
  record(out, [a, out]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    double* da = a.data()->grad.data();
    const double* y = out.values().data();
    const double* g = out.grad().data();
    for (size_t i = 0; i < a.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  return out;
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  for (size_t i = 0; i < a.size(); ++i) out.values()[i] = std::max(0.0, a.values()[i]);
  record(out, [a, out]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    double* da = a.data()->grad.data();
    const double* x = a.values().data();
    const double* g = out.grad().data();
    for (size_t i = 0; i < a.size(); ++i)
      if (x[i] > 0.0) da[i] += g[i];
  });
  return out;
}

Tensor Graph::softmax(const Tensor& a) {
  check_rank2(a, "softmax");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_out({m, n}, recording_ && a.requires_grad());
  kern::softmax_rows(a.values().data(), out.values().data(), m, n);
  record(out, [a, out, m, n]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* y = &out.values()[static_cast<size_t>(i) * n];
      const double* g = &out.grad()[static_cast<size_t>(i) * n];
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g[j] * y[j];
      double* da = &a.data()->grad[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) da[j] += y[j] * (g[j] - dot);
    }
  });
  return out;
}

Tensor Graph::log_softmax(const Tensor& a) {
  check_rank2(a, "log_softmax");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_out({m, n}, recording_ && a.requires_grad());
  kern::log_softmax_rows(a.values().data(), out.values().data(), m, n);
  record(out, [a, out, m, n]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* y = &out.values()[static_cast<size_t>(i) * n];
      const double* g = &out.grad()[static_cast<size_t>(i) * n];
      double gsum = 0.0;
      for (int j = 0; j < n; ++j) gsum += g[j];
      double* da = &a.data()->grad[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) da[j] += g[j] - std::exp(y[j]) * gsum;
    }
  });
  return out;
}

// ------------------------------------------------------ gather / stochastic

Tensor Graph::embedding(const Tensor& table, std::span<const int> ids) {
  check_rank2(table, "embedding");
  const int vocab = table.rows(), dim = table.cols();
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw ContractError("embedding: id " + std::to_string(id) +
                          " outside vocabulary of size " + std::to_string(vocab));
  const int m = static_cast<int>(ids.size());
  Tensor out = make_out({m, dim}, recording_ && table.requires_grad());
  for (int i = 0; i < m; ++i)
    std::memcpy(out.row_ptr(i), table.row_ptr(ids[i]), sizeof(double) * dim);
  std::vector<int> idv(ids.begin(), ids.end());
  record(out, [table, out, idv, dim]() {
    if (!table.requires_grad()) return;
    table.data()->ensure_grad();
    for (size_t i = 0; i < idv.size(); ++i) {
      double* dt = &table.data()->grad[static_cast<size_t>(idv[i]) * dim];
      const double* g = &out.grad()[i * dim];
      for (int j = 0; j < dim; ++j) dt[j] += g[j];
    }
  });
  return out;
}

Tensor Graph::dropout(const Tensor& a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0)
    throw ContractError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return a;  // identity in eval mode
  // inverted dropout: survivors scaled by 1/(1-p) so eval needs no rescaling
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (auto& mv : *mask) mv = (rng.uniform() < keep) ? inv_keep : 0.0;
  Tensor out = make_out(a.shape(), recording_ && a.requires_grad());
  const double* mv = mask->data();
  for (size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * mv[i];
  record(out, [a, out, mask]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    double* da = a.data()->grad.data();
    const double* g = out.grad().data();
    const double* mk = mask->data();
    for (size_t i = 0; i < a.size(); ++i) da[i] += g[i] * mk[i];
  });
  return out;
}

// ---------------------------------------------------- reductions / losses

Tensor Graph::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s, recording_ && a.requires_grad());
  record(out, [a, out]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    const double g = out.grad()[0];
    double* da = a.data()->grad.data();
    for (size_t i = 0; i < a.size(); ++i) da[i] += g;
  });
  return out;
}

Tensor Graph::mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(s * inv, recording_ && a.requires_grad());
  record(out, [a, out, inv]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    const double g = out.grad()[0] * inv;
    double* da = a.data()->grad.data();
    for (size_t i = 0; i < a.size(); ++i) da[i] += g;
  });
  return out;
}

Tensor Graph::pick_nll(const Tensor& logp, std::span<const int> ids,
                       std::span<const double> mask) {
  check_rank2(logp, "pick_nll");
  const int m = logp.rows(), n = logp.cols();
  if (static_cast<int>(ids.size()) != m || static_cast<int>(mask.size()) != m)
    throw ShapeError("pick_nll: ids/mask length " + std::to_string(ids.size()) +
                     " does not match rows of " + logp.shape_str());
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    if (mask[i] == 0.0) continue;
    if (ids[i] < 0 || ids[i] >= n)
      throw ContractError("pick_nll: target id " + std::to_string(ids[i]) +
                          " outside class axis of size " + std::to_string(n));
    s -= mask[i] * logp.at(i, ids[i]);
  }
  Tensor out = Tensor::scalar(s, recording_ && logp.requires_grad());
  std::vector<int> idv(ids.begin(), ids.end());
  std::vector<double> mkv(mask.begin(), mask.end());
  record(out, [logp, out, idv, mkv, n]() {
    if (!logp.requires_grad()) return;
    logp.data()->ensure_grad();
    const double g = out.grad()[0];
    for (size_t i = 0; i < idv.size(); ++i)
      if (mkv[i] != 0.0)
        logp.data()->grad[i * n + idv[i]] -= g * mkv[i];
  });
  return out;
}

Tensor Graph::sq_dist(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sq_dist");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  Tensor out = Tensor::scalar(s, recording_ && needs_grad({a, b}));
  record(out, [a, b, out]() {
    const double g = out.grad()[0];
    if (a.requires_grad()) a.data()->ensure_grad();
    if (b.requires_grad()) b.data()->ensure_grad();
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = 2.0 * g * (a.values()[i] - b.values()[i]);
      if (a.requires_grad()) a.data()->grad[i] += d;
      if (b.requires_grad()) b.data()->grad[i] -= d;
    }
  });
  return out;
}

Tensor Graph::euclidean_rows_mean(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "euclidean_rows_mean");
  check_rank2(a, "euclidean_rows_mean");
  const int m = a.rows(), n = a.cols();
  auto dists = std::make_shared<std::vector<double>>(m);
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    double sq = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = a.at(i, j) - b.at(i, j);
      sq += d * d;
    }
    (*dists)[i] = std::sqrt(sq);
    s += (*dists)[i];
  }
  const double inv_m = 1.0 / m;
  Tensor out = Tensor::scalar(s * inv_m, recording_ && needs_grad({a, b}));
  record(out, [a, b, out, dists, m, n, inv_m]() {
    const double g = out.grad()[0] * inv_m;
    if (a.requires_grad()) a.data()->ensure_grad();
    if (b.requires_grad()) b.data()->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double dist = (*dists)[i];
      if (dist == 0.0) continue;  // subgradient 0 at coincident rows
      const double c = g / dist;
      for (int j = 0; j < n; ++j) {
        const double d = c * (a.at(i, j) - b.at(i, j));
        if (a.requires_grad()) a.data()->grad[static_cast<size_t>(i) * n + j] += d;
        if (b.requires_grad()) b.data()->grad[static_cast<size_t>(i) * n + j] -= d;
      }
    }
  });
  return out;
}

Tensor Graph::rowwise_dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "rowwise_dot");
  check_rank2(a, "rowwise_dot");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_out({m, 1}, recording_ && needs_grad({a, b}));
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a.at(i, j) * b.at(i, j);
    out.values()[i] = s;
  }
  record(out, [a, b, out, m, n]() {
    for (int i = 0; i < m; ++i) {
      const double g = out.grad()[i];
      if (a.requires_grad()) {
        a.data()->ensure_grad();
        for (int j = 0; j < n; ++j)
          a.data()->grad[static_cast<size_t>(i) * n + j] += g * b.at(i, j);
      }
      if (b.requires_grad()) {
        b.data()->ensure_grad();
        for (int j = 0; j < n; ++j)
          b.data()->grad[static_cast<size_t>(i) * n + j] += g * a.at(i, j);
      }
    }
  });
  return out;
}

// ------------------------------------------------- recurrence / conv / max

Tensor Graph::mask_rows(const Tensor& fresh, const Tensor& prev,
                        const std::vector<double>& mask) {
  check_same_shape(fresh, prev, "mask_rows");
  check_rank2(fresh, "mask_rows");
  const int m = fresh.rows(), n = fresh.cols();
  if (static_cast<int>(mask.size()) != m)
    throw ShapeError("mask_rows: mask length " + std::to_string(mask.size()) +
                     " does not match rows of " + fresh.shape_str());
  Tensor out = make_out({m, n}, recording_ && needs_grad({fresh, prev}));
  for (int i = 0; i < m; ++i) {
    const Tensor& src = mask[i] != 0.0 ? fresh : prev;
    std::memcpy(out.row_ptr(i), src.row_ptr(i), sizeof(double) * n);
  }
  auto mk = std::make_shared<std::vector<double>>(mask);
  record(out, [fresh, prev, out, mk, m, n]() {
    for (int i = 0; i < m; ++i) {
      const Tensor& dst = (*mk)[i] != 0.0 ? fresh : prev;
      if (!dst.requires_grad()) continue;
      dst.data()->ensure_grad();
      for (int j = 0; j < n; ++j)
        dst.data()->grad[static_cast<size_t>(i) * n + j] +=
            out.grad()[static_cast<size_t>(i) * n + j];
    }
  });
  return out;
}

Tensor Graph::conv1d(const Tensor& x, const Tensor& w, int width) {
  check_rank2(x, "conv1d");
  check_rank2(w, "conv1d");
  const int t = x.rows(), d = x.cols(), f = w.cols();
  if (width < 1 || t < width)
    throw ShapeError("conv1d: width " + std::to_string(width) + " invalid for input " +
                     x.shape_str());
  if (w.rows() != width * d)
    throw ShapeError("conv1d: filter " + w.shape_str() + " does not match width*dim " +
                     std::to_string(width * d));
  const int p = t - width + 1;
  Tensor out = make_out({p, f}, recording_ && needs_grad({x, w}));
  // each output row is the window flattened row-major times the filter matrix
  for (int i = 0; i < p; ++i)
    kern::matmul_nn(x.row_ptr(i), w.values().data(), out.row_ptr(i), 1, width * d, f);
  record(out, [x, w, out, p, d, f, width]() {
    const int wd = width * d;
    for (int i = 0; i < p; ++i) {
      const double* g = &out.grad()[static_cast<size_t>(i) * f];
      if (x.requires_grad()) {
        x.data()->ensure_grad();
        for (int u = 0; u < wd; ++u) {
          double s = 0.0;
          const double* wrow = &w.values()[static_cast<size_t>(u) * f];
          for (int j = 0; j < f; ++j) s += g[j] * wrow[j];
          x.data()->grad[static_cast<size_t>(i) * d + u] += s;
        }
      }
      if (w.requires_grad()) {
        w.data()->ensure_grad();
        const double* window = &x.values()[static_cast<size_t>(i) * d];
        for (int u = 0; u < wd; ++u) {
          double* dw = &w.data()->grad[static_cast<size_t>(u) * f];
          const double xv = window[u];
          for (int j = 0; j < f; ++j) dw[j] += xv * g[j];
        }
      }
    }
  });
  return out;
}

Tensor Graph::max_rows(const Tensor& a) {
  check_rank2(a, "max_rows");
  const int t = a.rows(), f = a.cols();
  Tensor out = make_out({1, f}, recording_ && a.requires_grad());
  auto argmax = std::make_shared<std::vector<int>>(f, 0);
  for (int j = 0; j < f; ++j) {
    double best = a.at(0, j);
    int bi = 0;
    for (int i = 1; i < t; ++i)
      if (a.at(i, j) > best) {  // first max wins ties
        best = a.at(i, j);
        bi = i;
      }
    out.values()[j] = best;
    (*argmax)[j] = bi;
  }
  record(out, [a, out, argmax, f]() {
    if (!a.requires_grad()) return;
    a.data()->ensure_grad();
    const int n = a.cols();
    for (int j = 0; j < f; ++j)
      a.data()->grad[static_cast<size_t>((*argmax)[j]) * n + j] += out.grad()[j];
  });
  return out;
}

Tensor Graph::detach(const Tensor& a) { return a.clone_detached(); }

// ---------------------------------------------------------------- dispatch

Tensor Graph::apply(const std::string& kind, const std::vector<Tensor>& inputs) {
  auto need = [&](size_t n) {
    if (inputs.size() != n)
      throw ContractError("apply(" + kind + "): expected " + std::to_string(n) +
                          " inputs, got " + std::to_string(inputs.size()));
  };
  if (kind == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (kind == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (kind == "sub") { need(2); return sub(inputs[0], inputs[1]); }
  if (kind == "mul") { need(2); return mul(inputs[0], inputs[1]); }
  if (kind == "concat") { need(2); return concat_cols(inputs[0], inputs[1]); }
  if (kind == "slice") { need(1); return slice_cols(inputs[0], 0, (inputs[0].cols() + 1) / 2); }
  if (kind == "sigmoid") { need(1); return sigmoid(inputs[0]); }
  if (kind == "tanh") { need(1); return tanh(inputs[0]); }
  if (kind == "relu") { need(1); return relu(inputs[0]); }
  if (kind == "softmax") { need(1); return softmax(inputs[0]); }
  if (kind == "log_softmax") { need(1); return log_softmax(inputs[0]); }
  if (kind == "sum") { need(1); return sum(inputs[0]); }
  if (kind == "mean") { need(1); return mean(inputs[0]); }
  if (kind == "sq_dist") { need(2); return sq_dist(inputs[0], inputs[1]); }
  if (kind == "euclidean") { need(2); return euclidean_rows_mean(inputs[0], inputs[1]); }
  if (kind == "rowwise_dot") { need(2); return rowwise_dot(inputs[0], inputs[1]); }
  throw ContractError("apply: unsupported operation kind '" + kind + "'");
}

// ---------------------------------------------------------------- backward

void Graph::backward(const Tensor& loss) {
  if (!loss.is_scalar())
    throw ContractError("backward: loss must be scalar, got " + loss.shape_str());
  if (tape_.empty())
    throw ContractError("backward: empty graph (no recorded forward pass)");
  loss.data()->ensure_grad();
  loss.data()->grad[0] = 1.0;
  // nodes whose output never received gradient are dead branches
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it)
    if (it->out->grad.size() == it->out->value.size()) it->back();
  tape_.clear();  // one backward per forward pass
}

// -------------------------------------------------------------- grad check

double grad_check(const std::function<Tensor(Graph&, std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double eps) {
  if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");
  for (auto& t : inputs) t.set_requires_grad(true);

  Graph g(true);
  Tensor out = f(g, inputs);
  if (!out.is_scalar())
    throw ContractError("grad_check: closure must produce a scalar, got " +
                        out.shape_str());
  g.backward(out);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) {
    t.data()->ensure_grad();
    analytic.push_back(t.grad());
  }

  Graph eval(false);
  auto value_at = [&]() {
    std::vector<Tensor> copy = inputs;
    return f(eval, copy).item();
  };

  double max_rel = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& vals = inputs[ti].values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + eps;
      const double up = value_at();
      vals[i] = orig - eps;
      const double down = value_at();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[ti][i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace cpls
