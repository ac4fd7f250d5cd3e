// Serial reference vs OpenMP kernels, and the parts of a two-stream lookup.
#include <benchmark/benchmark.h>

#include <random>

#include "mkg/kernels.hpp"
#include "mkg/xmodal/index.hpp"
#include "mkg/xmodal/joint.hpp"
#include "mkg/xmodal/speed.hpp"

using namespace mkg;

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Mat m(r, c);
  for (auto& v : m.data) v = g(rng);
  return m;
}

template <void (*Gemm)(const Mat&, const Mat&, Mat&, bool)>
void BM_gemm(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const Mat a = random_mat(n, n, 1), b = random_mat(n, n, 2);
  Mat c(n, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations() * n * n * n));
}

template <void (*Matvec)(const Mat&, std::span<const double>, std::span<double>)>
void BM_matvec(benchmark::State& state) {
  const auto rows = std::size_t(state.range(0));
  const Mat m = random_mat(rows, 64, 3);
  const Mat q = random_mat(1, 64, 4);
  std::vector<double> out(rows);
  for (auto _ : state) {
    Matvec(m, q.row(0), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations() * rows * 64));
}

// Top-k over an index of unit rows, as match() does after its text forward.
void BM_index_scan(benchmark::State& state) {
  const auto rows = std::size_t(state.range(0));
  Mat m = random_mat(rows, 64, 5);
  std::vector<std::string> ids, sources(rows);
  for (std::size_t i = 0; i < rows; ++i) ids.push_back("img" + std::to_string(i));
  const xmodal::EmbeddingIndex index(std::move(ids), std::move(sources), std::move(m));
  const Mat q = random_mat(1, 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(xmodal::match_embedding(index, q.row(0), 10));
  state.SetItemsProcessed(std::int64_t(state.iterations() * rows));
}

// End-to-end comparison on the toy model, reported as counters.
void BM_two_stream_vs_joint(benchmark::State& state) {
  const auto candidates = std::size_t(state.range(0));
  xmodal::SpeedReport r;
  for (auto _ : state) r = xmodal::compare_two_stream(xmodal::toy_config(), candidates, 1, 7);
  state.counters["match_ms"] = r.match_seconds * 1e3;
  state.counters["joint_ms"] = r.joint_seconds * 1e3;
  state.counters["speedup"] = r.speedup();
}

}  // namespace

BENCHMARK(BM_gemm<kernels::reference::gemm>)->Name("gemm/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_gemm<kernels::gemm>)->Name("gemm/openmp")->Arg(64)->Arg(128)->Arg(256)->UseRealTime();
BENCHMARK(BM_matvec<kernels::reference::matvec>)->Name("matvec/serial")->Arg(1000)->Arg(100000);
BENCHMARK(BM_matvec<kernels::matvec>)->Name("matvec/openmp")->Arg(1000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_index_scan)->Arg(1000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_two_stream_vs_joint)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
