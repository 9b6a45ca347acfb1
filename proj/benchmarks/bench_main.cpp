#include <benchmark/benchmark.h>

#include "brc/kernels.hpp"
#include "brc/models.hpp"
#include "brc/simulator.hpp"

namespace {

using namespace brc;

IndividualData panel_data() {
  auto sc = ScenarioConfig::preset("fatigue");
  sc.waves = 4;
  const auto sim = simulate_panel(sc);
  FeatureSpec fs;
  FeatureBlock u;
  u.name = "u";
  for (const char* c : {"sex", "household_size"}) u.features.emplace_back(c, observed_levels(sim.records, c));
  fs.blocks = {u};
  return IndividualData::from_records(sim.records, build_design(sim.records, fs));
}

void BM_IndividualGradient(benchmark::State& state, const char* preset) {
  static const IndividualData data = panel_data();
  auto spec = ModelSpec::preset(preset);
  spec.age_gp.m = 20;
  spec.time_gp.m = 10;
  const auto model = make_model(spec, data);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(model->dim(), 0.1);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(model->log_density(theta, &grad));
  state.counters["rows"] = static_cast<double>(data.rows());
}
BENCHMARK_CAPTURE(BM_IndividualGradient, longitudinal_hill, "longitudinal-hill")->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_IndividualGradient, gam_hill, "gam-hill")->Unit(benchmark::kMicrosecond);

void BM_BrcGradient(benchmark::State& state) {
  static const BrcData data = simulate_brc_surface(BrcScenario::smooth_default(1)).data;
  auto spec = ModelSpec::preset("brc-original");
  spec.surface_gp.m = static_cast<int>(state.range(0));
  const auto model = make_model(spec, data);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(model->dim(), 0.1);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(model->log_density(theta, &grad));
  state.counters["cells"] = static_cast<double>(data.cells.size());
}
BENCHMARK(BM_BrcGradient)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_HsgpBasis1d(benchmark::State& state) {
  std::vector<double> x;
  for (int a = 0; a < kAgeCount; ++a) x.push_back(a);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_hsgp_1d(x, m, 1.5).phi.data());
}
BENCHMARK(BM_HsgpBasis1d)->Arg(16)->Arg(64);

void BM_HsgpBasis2dSymmetric(benchmark::State& state) {
  std::vector<double> x;
  for (int a = 0; a < kAgeCount; ++a) x.push_back(a);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_hsgp_2d_symmetric(x, x, m, 1.5).phi.data());
}
BENCHMARK(BM_HsgpBasis2dSymmetric)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_NegativeBinomial(benchmark::State& state) {
  int y = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nb_logpmf(y, 3.7, 0.8, Observation::nb2));
    y = (y + 1) % 30;
  }
}
BENCHMARK(BM_NegativeBinomial);

}  // namespace

BENCHMARK_MAIN();
