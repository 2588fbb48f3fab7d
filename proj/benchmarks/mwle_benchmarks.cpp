#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "mwle/asymptotics.hpp"
#include "mwle/gem.hpp"
#include "mwle/init.hpp"
#include "mwle/likelihood.hpp"
#include "mwle/simulation.hpp"

using namespace mwle;

namespace {

const std::vector<double>& model_sample(std::size_t n) {
  static std::map<std::size_t, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, sample(two_body_benchmark(), n, 20240601)).first;
  return it->second;
}

WeightConfig zig_weight(std::span<const double> data) { return parse_weight("zig:0.01,q0.95,0.1", data); }

void BM_ComponentIntegral(benchmark::State& state) {
  const auto w = WeightConfig::zig(0.01, 2000.0, 0.1);
  const GammaComponent c{300.0, 0.25};
  for (auto _ : state) benchmark::DoNotOptimize(component_weighted_integral(w, c, Moment::log_value));
}
BENCHMARK(BM_ComponentIntegral);

void BM_WeightedLoglik(benchmark::State& state) {
  const auto& data = model_sample(static_cast<std::size_t>(state.range(0)));
  const auto w = zig_weight(data);
  const auto p = two_body_benchmark();
  for (auto _ : state) benchmark::DoNotOptimize(weighted_loglik(data, p, w).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeightedLoglik)->Arg(10000)->Arg(100000);

void BM_Init(benchmark::State& state) {
  const auto& data = model_sample(10000);
  for (auto _ : state) benchmark::DoNotOptimize(cmm_init(data, 2).threshold);
}
BENCHMARK(BM_Init)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const auto& data = model_sample(10000);
  const auto w = state.range(1) ? zig_weight(data) : WeightConfig::unit();
  FitOptions o;
  o.method = state.range(0) ? GemMethod::transformed : GemMethod::hypothetical;
  o.theta_mode = ThetaMode::fixed;
  o.init = two_body_benchmark();
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, w, o).objective.value);
}
BENCHMARK(BM_Fit)->ArgNames({"transformed", "weighted"})->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Sandwich(benchmark::State& state) {
  const auto& data = model_sample(10000);
  const auto w = zig_weight(data);
  const auto p = two_body_benchmark();
  for (auto _ : state) benchmark::DoNotOptimize(sandwich(data, p, w).covariance(0, 0));
}
BENCHMARK(BM_Sandwich)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
