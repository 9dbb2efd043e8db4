#include <benchmark/benchmark.h>

#include <vector>

#include "funnel/calibrate.hpp"
#include "funnel/features.hpp"
#include "funnel/funnel.hpp"
#include "funnel/learn.hpp"
#include "funnel/metrics.hpp"
#include "funnel/random.hpp"
#include "funnel/synthetic.hpp"

using namespace funnel;

namespace {

SyntheticConfig small_suite() {
  SyntheticConfig sc;
  sc.n_languages = 3;
  sc.n_classes = 10;
  sc.docs_per_language_train = 100;
  sc.docs_per_language_test = 100;
  sc.seed = 9;
  return sc;
}

const MultilingualCorpus& corpus() {
  static const auto c = generate_synthetic(small_suite());
  return c;
}

FunnelConfig quick() {
  FunnelConfig cfg;
  cfg.meta_grid = {1.0, 100.0};
  cfg.naive_grid = {1.0, 100.0};
  cfg.seed = 9;
  return cfg;
}

void BM_Generate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(generate_synthetic(small_suite()));
}
BENCHMARK(BM_Generate)->Unit(benchmark::kMillisecond);

void BM_TfIdf(benchmark::State& state) {
  const auto& ds = corpus().train.at("da");
  const auto w = fit_weighting(ds);
  for (auto _ : state) {
    for (const auto& d : ds.documents) benchmark::DoNotOptimize(transform(w, d.vector));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.documents.size()));
}
BENCHMARK(BM_TfIdf);

void BM_TrainBinary(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  DenseMatrix x(n, 20);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.3;
    for (std::size_t j = 0; j < 20; ++j) x(i, j) = rng.normal() + (y[i] ? 0.5 : 0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(train_binary(x, y, TrainConfig{}));
}
BENCHMARK(BM_TrainBinary)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FitPlatt(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> h(500);
  std::vector<int> y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    y[i] = i % 2;
    h[i] = (y[i] ? 1.0 : -1.0) + rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_platt(h, y));
}
BENCHMARK(BM_FitPlatt);

void BM_TrainFunnel(benchmark::State& state) {
  auto cfg = quick();
  cfg.variant = state.range(0) ? Variant::KFCV : Variant::TAT;
  for (auto _ : state) benchmark::DoNotOptimize(train_funnel(corpus(), cfg));
}
BENCHMARK(BM_TrainFunnel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const auto m = train_funnel(corpus(), quick());
  const auto& docs = corpus().test.at("de").documents;
  for (auto _ : state) {
    for (const auto& d : docs) benchmark::DoNotOptimize(predict(m, "de", d.vector));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs.size()));
}
BENCHMARK(BM_Predict);

void BM_Confusion(benchmark::State& state) {
  Rng rng(6);
  std::vector<LabelSet> gold(5000), pred(5000);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (int c = 0; c < 20; ++c) {
      if (rng.uniform() < 0.2) gold[i].push_back(c);
      if (rng.uniform() < 0.2) pred[i].push_back(c);
    }
  }
  for (auto _ : state) {
    const auto cc = confusion(gold, pred, 20);
    benchmark::DoNotOptimize(micro_macro_aggregate(cc, Measure::F1));
  }
}
BENCHMARK(BM_Confusion);

}  // namespace

BENCHMARK_MAIN();
