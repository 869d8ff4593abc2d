// Parallel kernels vs their serial references. Run with OMP_NUM_THREADS set
// to compare scaling; both variants produce bit-identical results.
#include <benchmark/benchmark.h>

#include <vector>

#include "svaesr/core/image.hpp"
#include "svaesr/core/resize.hpp"
#include "svaesr/core/rng.hpp"
#include "svaesr/kernels/dense.hpp"

namespace {

using namespace svaesr;

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(standard_normal(rng));
  return v;
}

ImageTensor noise_image(int h, int w) {
  ImageTensor img(3, h, w);
  Rng rng(7);
  for (float& v : img.data()) v = static_cast<float>(uniform01(rng));
  return img;
}

// Decoder-sized product: one row per query-neighbour pair.
template <bool Parallel>
void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = 64, o = 64;
  const auto x = noise(static_cast<std::size_t>(n) * k, 1), m = noise(k * o, 2), b = noise(o, 3);
  std::vector<float> y(static_cast<std::size_t>(n) * o);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::matmul_nn(x.data(), m.data(), b.data(), y.data(), n, k, o);
    else
      kernels::serial::matmul_nn(x.data(), m.data(), b.data(), y.data(), n, k, o);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool Parallel>
void BM_matmul_tn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = 64, o = 64;
  const auto a = noise(static_cast<std::size_t>(n) * k, 1), g = noise(static_cast<std::size_t>(n) * o, 2);
  std::vector<float> c(k * o, 0.0f);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::matmul_tn_acc(a.data(), g.data(), c.data(), n, k, o);
    else
      kernels::serial::matmul_tn_acc(a.data(), g.data(), c.data(), n, k, o);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool Parallel>
void BM_im2col(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0)), c = 16;
  const auto in = noise(static_cast<std::size_t>(side) * side * c, 4);
  std::vector<float> col(static_cast<std::size_t>(side) * side * 9 * c);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::im2col3x3(in.data(), col.data(), side, side, c);
    else
      kernels::serial::im2col3x3(in.data(), col.data(), side, side, c);
    benchmark::DoNotOptimize(col.data());
  }
}

template <bool Parallel>
void BM_bicubic(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ImageTensor img = noise_image(side, side);
  for (auto _ : state) {
    ImageTensor out = Parallel ? bicubic_resize_to(img, side / 4, side / 4)
                               : serial::bicubic_resize_to(img, side / 4, side / 4);
    benchmark::DoNotOptimize(out.data().data());
  }
}

}  // namespace

BENCHMARK(BM_matmul<false>)->Name("matmul/serial")->Arg(4096)->Arg(36864);
BENCHMARK(BM_matmul<true>)->Name("matmul/omp")->Arg(4096)->Arg(36864);
BENCHMARK(BM_matmul_tn<false>)->Name("matmul_tn/serial")->Arg(36864);
BENCHMARK(BM_matmul_tn<true>)->Name("matmul_tn/omp")->Arg(36864);
BENCHMARK(BM_im2col<false>)->Name("im2col/serial")->Arg(48)->Arg(256);
BENCHMARK(BM_im2col<true>)->Name("im2col/omp")->Arg(48)->Arg(256);
BENCHMARK(BM_bicubic<false>)->Name("bicubic/serial")->Arg(512);
BENCHMARK(BM_bicubic<true>)->Name("bicubic/omp")->Arg(512);

BENCHMARK_MAIN();
