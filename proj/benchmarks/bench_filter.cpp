#include "iterfilt/iterfilt.hpp"

#include <benchmark/benchmark.h>

using namespace iterfilt;

namespace {

struct Lgss {
  ModelSpec model;
  ObservationSeries data;
  ParamVector theta;
};

const Lgss& lgss() {
  static const Lgss p = [] {
    auto entry = models::scalar_lgss();
    const ParamVector full(entry.spec.transform.to_unconstrained(entry.defaults));
    auto data = simulate(entry.spec, full, TimeGrid::regular(0.0, 1.0, 100), RngStream(1)).observations;
    ModelSpec model = restrict_parameters(entry.spec, entry.defaults, {0, 1});
    return Lgss{model, std::move(data), ParamVector(model.transform.to_unconstrained(entry.defaults.head(2)))};
  }();
  return p;
}

void BM_ParticleFilter(benchmark::State& state) {
  const auto& p = lgss();
  const auto J = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(particle_filter(p.model, p.theta, p.data, J, RngStream(++seed)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(J * p.data.size()));
}
BENCHMARK(BM_ParticleFilter)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ScoreEstimate(benchmark::State& state) {
  const auto& p = lgss();
  const auto J = static_cast<std::size_t>(state.range(0));
  const KernelSpec kernel = KernelSpec::identity(2);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(score_estimate(p.model, p.theta, p.data, kernel, {0.01, 0.1}, J, RngStream(++seed)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(J * p.data.size()));
}
BENCHMARK(BM_ScoreEstimate)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

std::vector<double> random_weights(std::size_t J) {
  RngStream rng(5);
  std::vector<double> w(J);
  for (auto& x : w) x = std::exp(3.0 * rng.normal());
  return w;
}

void BM_SystematicResample(benchmark::State& state) {
  const auto w = random_weights(static_cast<std::size_t>(state.range(0)));
  RngStream rng(9);
  for (auto _ : state) benchmark::DoNotOptimize(systematic_resample(w, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SystematicResample)->Arg(1000)->Arg(100000);

void BM_MultinomialResample(benchmark::State& state) {
  const auto w = random_weights(static_cast<std::size_t>(state.range(0)));
  RngStream rng(9);
  for (auto _ : state) benchmark::DoNotOptimize(multinomial_resample(w, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MultinomialResample)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
