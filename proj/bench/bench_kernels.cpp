// Times the OpenMP kernels against their serial reference implementations
// at encoder-realistic and larger sizes. Run with PFGT_THREADS=<n> to pin
// the worker count.

#include <chrono>
#include <cstdio>
#include <vector>

#include "pfgt/kernels.hpp"
#include "pfgt/kernels_ref.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/threads.hpp"

using namespace pfgt;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal(0.0, 1.0));
  return v;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void bench_matmul(int m, int k, int n, int reps) {
  Rng rng(1);
  const auto a = random_vec(std::size_t(m) * k, rng);
  const auto b = random_vec(std::size_t(k) * n, rng);
  std::vector<float> c(std::size_t(m) * n);
  const double serial =
      time_ms([&] { kernels_ref::matmul(a.data(), b.data(), c.data(), m, k, n); }, reps);
  const double parallel =
      time_ms([&] { kernels::matmul(a.data(), b.data(), c.data(), m, k, n); }, reps);
  std::printf("matmul %4dx%4dx%4d   serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", m, k, n,
              serial, parallel, serial / parallel);
}

void bench_rows(int m, int n, int reps) {
  Rng rng(2);
  const auto x = random_vec(std::size_t(m) * n, rng);
  const auto gamma = random_vec(std::size_t(n), rng);
  const auto beta = random_vec(std::size_t(n), rng);
  std::vector<float> y(x.size());
  std::vector<float> mean(static_cast<std::size_t>(m));
  std::vector<float> rstd(static_cast<std::size_t>(m));

  const double ln_serial = time_ms(
      [&] { kernels_ref::layer_norm_rows(x.data(), gamma.data(), beta.data(), y.data(), m, n, 1e-5f); },
      reps);
  const double ln_par = time_ms(
      [&] {
        kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), y.data(), mean.data(),
                                 rstd.data(), m, n, 1e-5f);
      },
      reps);
  std::printf("layer_norm %5dx%4d   serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", m, n,
              ln_serial, ln_par, ln_serial / ln_par);

  const double sm_serial =
      time_ms([&] { kernels_ref::softmax_rows(x.data(), y.data(), m, n); }, reps);
  const double sm_par = time_ms([&] { kernels::softmax_rows(x.data(), y.data(), m, n); }, reps);
  std::printf("softmax    %5dx%4d   serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", m, n,
              sm_serial, sm_par, sm_serial / sm_par);

  const double ge_serial = time_ms([&] { kernels_ref::gelu(x.data(), y.data(), x.size()); }, reps);
  const double ge_par = time_ms([&] { kernels::gelu(x.data(), y.data(), x.size()); }, reps);
  std::printf("gelu       %5dx%4d   serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", m, n,
              ge_serial, ge_par, ge_serial / ge_par);
}

}  // namespace

int main() {
  const int threads = configure_threads();
  std::printf("threads: %d\n\n", threads);

  // Encoder-shaped workloads (sequence x embed sizes seen during training).
  bench_matmul(77, 64, 64, 400);
  bench_matmul(77, 77, 64, 400);
  // Larger squares where parallel speedup becomes visible.
  bench_matmul(256, 256, 256, 20);
  bench_matmul(512, 512, 512, 5);
  std::printf("\n");
  bench_rows(77, 64, 2000);
  bench_rows(4096, 256, 20);
  return 0;
}
