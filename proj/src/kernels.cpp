#include "cpls/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

namespace cpls::kern {

namespace {
std::atomic<bool> g_parallel{true};

// Work below this many elements is not worth a parallel region on elementwise
// maps; matmuls dispatch on their own row/column counts.
constexpr size_t kElemwiseThreshold = 16384;
}  // namespace

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------- matmul_nn

void matmul_nn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
  if (m >= 4) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      std::fill(crow, crow + n, 0.0);
      const double* arow = a + static_cast<size_t>(i) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // few rows: split the columns instead; each output element still sums
    // over k in ascending order
#pragma omp parallel
    {
#pragma omp for schedule(static)
      for (int j0 = 0; j0 < n; j0 += 256) {
        const int j1 = std::min(n, j0 + 256);
        for (int i = 0; i < m; ++i) {
          double* crow = c + static_cast<size_t>(i) * n;
          std::fill(crow + j0, crow + j1, 0.0);
          const double* arow = a + static_cast<size_t>(i) * k;
          for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + static_cast<size_t>(kk) * n;
            for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
          }
        }
      }
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (parallel_enabled())
    matmul_nn_omp(a, b, c, m, k, n);
  else
    matmul_nn_serial(a, b, c, m, k, n);
}

// ---------------------------------------------------------------- matmul_nt

void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = s;
    }
  }
}

void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n) {
  if (m >= 4) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<size_t>(i) * k;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
        crow[j] = s;
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double s = 0.0;
        for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
        c[static_cast<size_t>(i) * n + j] = s;
      }
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  if (parallel_enabled())
    matmul_nt_omp(a, b, c, m, k, n);
  else
    matmul_nt_serial(a, b, c, m, k, n);
}

// ---------------------------------------------------------------- matmul_tn

void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    double* crow = c + static_cast<size_t>(kk) * n;
    std::fill(crow, crow + n, 0.0);
    for (int i = 0; i < m; ++i) {
      const double av = a[static_cast<size_t>(i) * k + kk];
      const double* brow = b + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int kk = 0; kk < k; ++kk) {
    double* crow = c + static_cast<size_t>(kk) * n;
    std::fill(crow, crow + n, 0.0);
    for (int i = 0; i < m; ++i) {
      const double av = a[static_cast<size_t>(i) * k + kk];
      const double* brow = b + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (parallel_enabled())
    matmul_tn_omp(a, b, c, m, k, n);
  else
    matmul_tn_serial(a, b, c, m, k, n);
}

// -------------------------------------------------------------- elementwise

void vtanh_serial(const double* in, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void vtanh_omp(const double* in, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = std::tanh(in[i]);
}

void vtanh(const double* in, double* out, size_t n) {
  if (parallel_enabled() && n >= kElemwiseThreshold)
    vtanh_omp(in, out, n);
  else
    vtanh_serial(in, out, n);
}

void vsigmoid_serial(const double* in, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

void vsigmoid_omp(const double* in, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

void vsigmoid(const double* in, double* out, size_t n) {
  if (parallel_enabled() && n >= kElemwiseThreshold)
    vsigmoid_omp(in, out, n);
  else
    vsigmoid_serial(in, out, n);
}

void vadd_serial(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vadd_omp(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] + b[i];
}

void vadd(const double* a, const double* b, double* out, size_t n) {
  if (parallel_enabled() && n >= kElemwiseThreshold)
    vadd_omp(a, b, out, n);
  else
    vadd_serial(a, b, out, n);
}

void vmul_serial(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vmul_omp(const double* a, const double* b, double* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] * b[i];
}

void vmul(const double* a, const double* b, double* out, size_t n) {
  if (parallel_enabled() && n >= kElemwiseThreshold)
    vmul_omp(a, b, out, n);
  else
    vmul_serial(a, b, out, n);
}

void axpy_serial(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_omp(double alpha, const double* x, double* y, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  if (parallel_enabled() && n >= kElemwiseThreshold)
    axpy_omp(alpha, x, y, n);
  else
    axpy_serial(alpha, x, y, n);
}

// ------------------------------------------------------------------ softmax

namespace {
inline void softmax_row(const double* in, double* out, int cols) {
  double mx = in[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < cols; ++j) out[j] *= inv;
}

inline void log_softmax_row(const double* in, double* out, int cols) {
  double mx = in[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) sum += std::exp(in[j] - mx);
  const double lse = mx + std::log(sum);
  for (int j = 0; j < cols; ++j) out[j] = in[j] - lse;
}
}  // namespace

void softmax_rows_serial(const double* in, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    softmax_row(in + static_cast<size_t>(i) * cols, out + static_cast<size_t>(i) * cols, cols);
}

void softmax_rows_omp(const double* in, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    softmax_row(in + static_cast<size_t>(i) * cols, out + static_cast<size_t>(i) * cols, cols);
}

void softmax_rows(const double* in, double* out, int rows, int cols) {
  if (parallel_enabled() && rows >= 4 && static_cast<size_t>(rows) * cols >= kElemwiseThreshold)
    softmax_rows_omp(in, out, rows, cols);
  else
    softmax_rows_serial(in, out, rows, cols);
}

void log_softmax_rows_serial(const double* in, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    log_softmax_row(in + static_cast<size_t>(i) * cols, out + static_cast<size_t>(i) * cols, cols);
}

void log_softmax_rows_omp(const double* in, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    log_softmax_row(in + static_cast<size_t>(i) * cols, out + static_cast<size_t>(i) * cols, cols);
}

void log_softmax_rows(const double* in, double* out, int rows, int cols) {
  if (parallel_enabled() && rows >= 4 && static_cast<size_t>(rows) * cols >= kElemwiseThreshold)
    log_softmax_rows_omp(in, out, rows, cols);
  else
    log_softmax_rows_serial(in, out, rows, cols);
}

}  // namespace cpls::kern
