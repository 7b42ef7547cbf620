#pragma once

#include <cstddef>

// Dense kernels behind the autodiff ops. Each has a serial reference
// implementation and an OpenMP one. The parallel versions split work over
// independent output rows (or column blocks) only, so the floating-point
// accumulation order per output element is identical to the serial loop and
// results are bit-identical at any thread count.
namespace cpls::kern {

// Global switch; tests and the benchmark flip it. Default: parallel.
void set_parallel(bool on);
bool parallel_enabled();

// C(M x N) = A(M x K) * B(K x N)
void matmul_nn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);

// C(M x N) = A(M x K) * B(N x K)^T
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);

// C(K x N) = A(M x K)^T * B(M x N)
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// elementwise maps, out may alias in
void vtanh_serial(const double* in, double* out, size_t n);
void vtanh_omp(const double* in, double* out, size_t n);
void vtanh(const double* in, double* out, size_t n);

void vsigmoid_serial(const double* in, double* out, size_t n);
void vsigmoid_omp(const double* in, double* out, size_t n);
void vsigmoid(const double* in, double* out, size_t n);

// out = a + b elementwise
void vadd_serial(const double* a, const double* b, double* out, size_t n);
void vadd_omp(const double* a, const double* b, double* out, size_t n);
void vadd(const double* a, const double* b, double* out, size_t n);

// out = a * b elementwise
void vmul_serial(const double* a, const double* b, double* out, size_t n);
void vmul_omp(const double* a, const double* b, double* out, size_t n);
void vmul(const double* a, const double* b, double* out, size_t n);

// y += alpha * x
void axpy_serial(double alpha, const double* x, double* y, size_t n);
void axpy_omp(double alpha, const double* x, double* y, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);

// row-wise softmax / log-softmax, numerically stabilized by the row max
void softmax_rows_serial(const double* in, double* out, int rows, int cols);
void softmax_rows_omp(const double* in, double* out, int rows, int cols);
void softmax_rows(const double* in, double* out, int rows, int cols);

void log_softmax_rows_serial(const double* in, double* out, int rows, int cols);
void log_softmax_rows_omp(const double* in, double* out, int rows, int cols);
void log_softmax_rows(const double* in, double* out, int rows, int cols);

}  // namespace cpls::kern
