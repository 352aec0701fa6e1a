// Serial reference kernels against their OpenMP variants, plus one RPT block
// forward/backward at full width (the paper profile).

#include <benchmark/benchmark.h>

#include <vector>

#include "dad/kernels.hpp"
#include "dad/ops.hpp"
#include "dad/rpt.hpp"

namespace {

using dad::kernels::Trans;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  dad::RandomSource rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      dad::kernels::parallel::gemm(Trans::No, Trans::No, n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      dad::kernels::serial::gemm(Trans::No, Trans::No, n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(128)->Arg(256)->Arg(512);

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_vec(n * n, 3);
  std::vector<float> y(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      dad::kernels::parallel::softmax_rows(x.data(), n, n, y.data());
    } else {
      dad::kernels::serial::softmax_rows(x.data(), n, n, y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Softmax<false>)->Name("softmax/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_Softmax<true>)->Name("softmax/parallel")->Arg(256)->Arg(1024);

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const std::size_t rows = 256, dim = 512;
  const auto x = random_vec(rows * dim, 4), g = random_vec(dim, 5), b = random_vec(dim, 6);
  std::vector<float> y(rows * dim), mean(rows), rstd(rows);
  for (auto _ : state) {
    if constexpr (Parallel) {
      dad::kernels::parallel::layer_norm_forward(x.data(), rows, dim, g.data(), b.data(), 1e-5f,
                                                 y.data(), mean.data(), rstd.data());
    } else {
      dad::kernels::serial::layer_norm_forward(x.data(), rows, dim, g.data(), b.data(), 1e-5f,
                                               y.data(), mean.data(), rstd.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_LayerNorm<false>)->Name("layer_norm/serial");
BENCHMARK(BM_LayerNorm<true>)->Name("layer_norm/parallel");

// N = 256 tokens, D* = 512, 8 heads, r_clip = 128; forward plus backward.
void BM_RptBlockFullWidth(benchmark::State& state) {
  dad::RptConfig cfg;
  cfg.model_dim = 512;
  cfg.heads = 8;
  cfg.r_clip = 128;
  cfg.dropout_rate = 0.1;
  dad::RandomSource rng(7);
  dad::RptBlock<float> block("b", cfg, rng);
  dad::RelativeEmbeddingTable<float> table("t", cfg, rng);
  dad::ParameterList<float> params;
  block.collect(params);
  table.collect(params);
  const auto xv = random_vec(256 * 512, 8);
  for (auto _ : state) {
    dad::Tensor<float> x({256, 512}, xv, true);
    auto y = block.forward(x, &table, true, rng);
    dad::backward(dad::mean(y));
    for (auto* p : params) p->value.zero_grad();
  }
  state.SetLabel("forward+backward");
}
BENCHMARK(BM_RptBlockFullWidth)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
