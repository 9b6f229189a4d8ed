#include <benchmark/benchmark.h>

#include "mbridge/metrics/metrics.hpp"
#include "mbridge/numcore/lstm.hpp"
#include "mbridge/numcore/ops.hpp"
#include "mbridge/numcore/rng.hpp"

using namespace mbridge;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_tensor(rng, {n, n});
  const auto b = random_tensor(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_LstmStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  Rng rng(2);
  LstmParams p("cell", d, d);
  for (auto* q : p.parameters()) q->init_uniform(rng, 0.08);
  const auto x = random_tensor(rng, {batch, d});
  const auto h = random_tensor(rng, {batch, d});
  const auto c = random_tensor(rng, {batch, d});
  for (auto _ : state) benchmark::DoNotOptimize(lstm_cell(p, x, h, c));
}
BENCHMARK(BM_LstmStep)->Arg(1)->Arg(16);

void BM_LstmStepBackward(benchmark::State& state) {
  const std::size_t batch = 16, d = 64;
  Rng rng(3);
  LstmParams p("cell", d, d);
  for (auto* q : p.parameters()) q->init_uniform(rng, 0.08);
  LstmStepCache cache;
  lstm_cell(p, random_tensor(rng, {batch, d}), random_tensor(rng, {batch, d}), random_tensor(rng, {batch, d}), &cache);
  const auto g = random_tensor(rng, {batch, d});
  for (auto _ : state) benchmark::DoNotOptimize(lstm_cell_backward(p, cache, g, Tensor()));
}
BENCHMARK(BM_LstmStepBackward);

void BM_Evaluate(benchmark::State& state) {
  const std::vector<std::string> pool{"a", "small", "large", "red", "blue", "green", "circle", "square", "and"};
  Rng rng(4);
  metrics::EvalCorpus corpus;
  const auto sentence = [&] {
    metrics::Tokens s(4 + rng.index(14));
    for (auto& w : s) w = pool[rng.index(pool.size())];
    return s;
  };
  for (std::int64_t i = 0; i < state.range(0); ++i) corpus.add(i, sentence(), {sentence()});
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate(corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
