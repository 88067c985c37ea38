// Benchmarks the OpenMP kernels against the serial reference implementations
// on the conv shapes the trainer actually runs, and reports GFLOP/s.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "matchgan/kernels.hpp"
#include "matchgan/kernels_serial.hpp"
#include "matchgan/rng.hpp"

using namespace matchgan;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

template <class T>
Tensor<T> rand_t(Shape s, Rng& rng) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.v) v = static_cast<T>(rng.uniform() * 2 - 1);
  return t;
}

struct ConvShape {
  const char* name;
  int64_t B, Ci, H, Co, k, stride, pad;
};

template <class T>
void bench_conv(const ConvShape& s, int reps) {
  Rng rng(1);
  auto X = rand_t<T>({s.B, s.Ci, s.H, s.H}, rng);
  auto W = rand_t<T>({s.Co, s.Ci, s.k, s.k}, rng);
  Tensor<T> Y;
  const int64_t Ho = kernels::conv_out_size(s.H, s.k, s.stride, s.pad);
  const double flops =
      2.0 * s.B * s.Co * Ho * Ho * s.Ci * s.k * s.k;

  kernels::conv2d_forward(X, W, static_cast<const T*>(nullptr), s.stride,
                          s.pad, Y);  // warm up
  double t0 = now_s();
  for (int i = 0; i < reps; ++i)
    kernels::conv2d_forward(X, W, static_cast<const T*>(nullptr), s.stride,
                            s.pad, Y);
  double t_omp = (now_s() - t0) / reps;

  Tensor<T> Yref;
  t0 = now_s();
  serial::conv2d_forward(X, W, static_cast<const T*>(nullptr), s.stride,
                         s.pad, Yref);
  double t_ser = now_s() - t0;

  double diff = 0;
  for (int64_t i = 0; i < Y.numel(); ++i)
    diff = std::max(diff, std::abs(double(Y[i]) - double(Yref[i])));

  std::printf("%-28s omp %8.3f ms (%6.2f GF/s)  serial %8.3f ms  x%5.2f  max|d|=%.2e\n",
              s.name, t_omp * 1e3, flops / t_omp * 1e-9, t_ser * 1e3,
              t_ser / t_omp, diff);
}

template <class T>
void bench_gemm(int64_t M, int64_t N, int64_t K, int reps) {
  Rng rng(2);
  auto A = rand_t<T>({M, K}, rng);
  auto B = rand_t<T>({K, N}, rng);
  Tensor<T> C({M, N});
  kernels::gemm_nn(M, N, K, A.data(), B.data(), C.data(), false);
  double t0 = now_s();
  for (int i = 0; i < reps; ++i)
    kernels::gemm_nn(M, N, K, A.data(), B.data(), C.data(), false);
  double t_omp = (now_s() - t0) / reps;

  Tensor<T> Cref({M, N});
  t0 = now_s();
  serial::gemm_nn(M, N, K, A.data(), B.data(), Cref.data(), false);
  double t_ser = now_s() - t0;
  std::printf("gemm %4ldx%5ldx%4ld          omp %8.3f ms (%6.2f GF/s)  serial %8.3f ms  x%5.2f\n",
              long(M), long(N), long(K), t_omp * 1e3,
              2.0 * M * N * K / t_omp * 1e-9, t_ser * 1e3, t_ser / t_omp);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  std::printf("threads: %d\n", omp_get_max_threads());

  std::printf("-- float32 --\n");
  bench_gemm<float>(64, 4096, 576, reps);
  bench_gemm<float>(256, 1024, 1152, reps);
  bench_conv<float>({"conv 16x3x32 -> 16 (k4 s2)", 16, 3, 32, 16, 4, 2, 1},
                    reps);
  bench_conv<float>({"conv 16x32x8 -> 32 (k3 s1)", 16, 32, 8, 32, 3, 1, 1},
                    reps);
  bench_conv<float>({"conv 16x64x8 -> 64 (k3 s1)", 16, 64, 8, 64, 3, 1, 1},
                    reps);
  bench_conv<float>({"conv 16x64x4 -> 128 (k4 s2)", 16, 64, 4, 128, 4, 2, 1},
                    reps);

  std::printf("-- float64 --\n");
  bench_gemm<double>(64, 4096, 576, reps);
  bench_conv<double>({"conv 16x32x8 -> 32 (k3 s1)", 16, 32, 8, 32, 3, 1, 1},
                     reps);
  return 0;
}
