// Times the serial reference kernels against the OpenMP ones on the shapes
// the models actually hit, and reports a full training-step rate at both the
// default model size and the small synthetic-task size.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cpls/kernels.hpp"
#include "cpls/rng.hpp"
#include "cpls/training.hpp"

using namespace cpls;
using clock_type = std::chrono::steady_clock;

namespace {

double time_call(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = clock_type::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(clock_type::now() - t0).count() / reps;
}

void bench_matmul(const char* name,
                  void (*serial)(const double*, const double*, double*, int, int, int),
                  void (*parallel)(const double*, const double*, double*, int, int, int),
                  int m, int k, int n) {
  Rng rng(42);
  // sized for whichever operand layout the variant reads
  const size_t big = std::max(static_cast<size_t>(k) * n, static_cast<size_t>(m) * n);
  std::vector<double> a(static_cast<size_t>(m) * k), b(big), c(big), c2(big);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);

  const double flops = 2.0 * m * k * n;
  const int reps = std::max(1, static_cast<int>(2e8 / flops));
  const double ts = time_call([&] { serial(a.data(), b.data(), c.data(), m, k, n); }, reps);
  const double tp =
      time_call([&] { parallel(a.data(), b.data(), c2.data(), m, k, n); }, reps);
  bool same = c == c2;
  std::printf("%-12s %4dx%-4dx%-4d  serial %7.2f GF/s  omp %7.2f GF/s  x%.2f  bit-identical=%s\n",
              name, m, k, n, flops / ts / 1e9, flops / tp / 1e9, ts / tp,
              same ? "yes" : "NO");
}

void bench_elementwise() {
  const size_t n = 1 << 20;
  Rng rng(7);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = rng.uniform(-2, 2);
  const double ts = time_call([&] { kern::vtanh_serial(x.data(), y.data(), n); }, 20);
  const double tp = time_call([&] { kern::vtanh_omp(x.data(), y.data(), n); }, 20);
  std::printf("%-12s n=%zu       serial %7.2f Melem/s  omp %7.2f Melem/s  x%.2f\n",
              "tanh", n, n / ts / 1e6, n / tp / 1e6, ts / tp);

  const int rows = 512, cols = 2048;
  std::vector<double> sm_in(static_cast<size_t>(rows) * cols), sm_out(sm_in.size());
  for (auto& v : sm_in) v = rng.uniform(-4, 4);
  const double ss =
      time_call([&] { kern::softmax_rows_serial(sm_in.data(), sm_out.data(), rows, cols); }, 20);
  const double sp =
      time_call([&] { kern::softmax_rows_omp(sm_in.data(), sm_out.data(), rows, cols); }, 20);
  std::printf("%-12s %dx%d    serial %7.2f Mrow/s   omp %7.2f Mrow/s   x%.2f\n",
              "softmax", rows, cols, rows / ss / 1e6, rows / sp / 1e6, ss / sp);
}

// one DAE optimizer step (forward+backward+update) at a given model size
void bench_train_step(const char* name, int embed, int hidden, int batch) {
  training::TrainingConfig cfg;
  cfg.embed_dim = embed;
  cfg.hidden = hidden;
  cfg.batch_size = batch;
  cfg.dae_steps = 1;
  cfg.seed = 3;
  const int vocab = 120;
  training::ModelBundle bundle(cfg, vocab);

  Rng rng(11);
  std::vector<corpus::IdSeq> sentences;
  for (int i = 0; i < batch; ++i) {
    corpus::IdSeq s;
    const int len = 6 + static_cast<int>(rng.uniform_int(4));
    for (int t = 0; t < len; ++t)
      s.push_back(4 + static_cast<int>(rng.uniform_int(vocab - 4)));
    sentences.push_back(s);
  }
  Rng noise(1), drop(2);
  const auto step = [&] {
    training::dae_step(bundle, sentences, "a", noise, drop, true);
  };
  const double t = time_call(step, 3);
  std::printf("%-28s %8.1f ms/step  (%5.1f steps/min)\n", name, t * 1e3, 60.0 / t);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n\n", omp_get_max_threads());
#endif
  std::printf("-- matmul kernels (model shapes) --\n");
  bench_matmul("nn", kern::matmul_nn_serial, kern::matmul_nn_omp, 32, 300, 2000);
  bench_matmul("nn", kern::matmul_nn_serial, kern::matmul_nn_omp, 32, 500, 2000);
  bench_matmul("nn (decode)", kern::matmul_nn_serial, kern::matmul_nn_omp, 1, 500, 2000);
  bench_matmul("nt", kern::matmul_nt_serial, kern::matmul_nt_omp, 32, 2000, 500);
  bench_matmul("tn", kern::matmul_tn_serial, kern::matmul_tn_omp, 32, 500, 2000);
  std::printf("\n-- elementwise / softmax --\n");
  bench_elementwise();
  std::printf("\n-- full DAE optimizer steps --\n");
  bench_train_step("default size (300/500, b32)", 300, 500, 32);
  bench_train_step("synthetic size (64/64, b32)", 64, 64, 32);
  return 0;
}
