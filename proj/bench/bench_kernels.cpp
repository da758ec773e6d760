// Serial reference against the OpenMP kernels. Parallel variants run at the
// machine's thread count; dataset generation compares one thread to all.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "traj/env/dataset.hpp"
#include "traj/eval/cluster.hpp"
#include "traj/num/kernels.hpp"
#include "traj/num/rng.hpp"

namespace {

using traj::num::AttentionShape;
using traj::num::Rng;
using traj::num::Tensor;

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = rng.normal_tensor(n, n), b = rng.normal_tensor(n, n);
  Tensor c = Tensor::zeros(n, n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      traj::num::kernels::gemm_nn(n, n, n, a.data().data(), b.data().data(), c.data().data(), false);
    } else {
      traj::num::reference::gemm_nn(n, n, n, a.data().data(), b.data().data(), c.data().data(), false);
    }
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  AttentionShape s;
  s.sequences = 16;
  s.length = static_cast<std::size_t>(state.range(0));
  s.width = 64;
  s.heads = 4;
  Rng rng(2);
  const std::size_t rows = s.sequences * s.length;
  const Tensor q = rng.normal_tensor(rows, s.width), k = rng.normal_tensor(rows, s.width),
               v = rng.normal_tensor(rows, s.width);
  std::vector<double> probs(s.sequences * s.heads * s.length * s.length), out(rows * s.width);
  for (auto _ : state) {
    if constexpr (Parallel) {
      traj::num::kernels::attention_forward(s, q.data().data(), k.data().data(), v.data().data(), probs.data(),
                                            out.data());
    } else {
      traj::num::reference::attention_forward(s, q.data().data(), k.data().data(), v.data().data(), probs.data(),
                                              out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_KMeansAssign(benchmark::State& state) {
  Rng rng(3);
  const Tensor points = rng.normal_tensor(static_cast<std::size_t>(state.range(0)), 10);
  const Tensor centroids = rng.normal_tensor(8, 10);
  std::vector<std::size_t> labels;
  for (auto _ : state) {
    labels.clear();
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(traj::eval::assign_nearest(points, centroids, labels));
    } else {
      benchmark::DoNotOptimize(traj::eval::reference::assign_nearest(points, centroids, labels));
    }
  }
}

void BM_GenerateDataset(benchmark::State& state) {
  const int threads = state.range(0) == 0 ? omp_get_max_threads() : static_cast<int>(state.range(0));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  const auto spec = traj::env::default_spec("waypoint2d", 100);
  for (auto _ : state) benchmark::DoNotOptimize(traj::env::generate_dataset(spec, 3, 60, 7));
  omp_set_num_threads(saved);
  state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(50)->Arg(100);
BENCHMARK(BM_Attention<true>)->Name("attention/openmp")->Arg(50)->Arg(100);
BENCHMARK(BM_KMeansAssign<false>)->Name("kmeans_assign/serial")->Arg(180)->Arg(100000);
BENCHMARK(BM_KMeansAssign<true>)->Name("kmeans_assign/openmp")->Arg(180)->Arg(100000);
// Argument 1 is one thread; 0 means all available threads.
BENCHMARK(BM_GenerateDataset)->Name("generate_dataset")->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
