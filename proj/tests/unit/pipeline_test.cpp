#include <gtest/gtest.h>

#include "brc/error.hpp"
#include "brc/pipeline.hpp"
#include "brc/simulator.hpp"

namespace brc {
namespace {

IndividualData design_for(const std::vector<SurveyRecord>& records) {
  FeatureSpec fs;
  FeatureBlock u;
  u.name = "u";
  u.features = {CategoricalFeature("sex", observed_levels(records, "sex"))};
  fs.blocks = {u};
  return IndividualData::from_records(records, build_design(records, fs));
}

SamplerConfig quick() {
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 150;
  cfg.sampling = 150;
  cfg.seed = 4;
  return cfg;
}

std::vector<WaveData> split_waves(const ScenarioConfig& sc) {
  const auto sim = simulate_panel(sc);
  std::vector<WaveData> waves;
  for (int t = 1; t <= sc.waves; ++t) {
    std::vector<SurveyRecord> rows;
    for (const auto& r : sim.records) {
      if (r.wave == t) rows.push_back(r);
    }
    waves.push_back({t, design_for(rows)});
  }
  return waves;
}

TEST(Sequence, PriorsCentreOnPreviousMeans) {
  auto sc = ScenarioConfig::preset("small");
  sc.waves = 2;
  auto spec = ModelSpec::preset("gam-hill");
  spec.age_gp.m = 6;
  SequenceConfig cfg;
  cfg.sampler = quick();
  const auto fits = fit_sequence(split_waves(sc), spec, cfg);
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_EQ(fits[1].provenance, PriorProvenance::propagated);
  const auto& prior = fits[1].spec.priors.at("beta");
  const auto& mean = fits[0].posterior_mean.at("beta");
  ASSERT_EQ(prior.size(), static_cast<std::size_t>(mean.size()));
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    EXPECT_EQ(prior[static_cast<std::size_t>(k)].a, mean[k]);
    EXPECT_EQ(prior[static_cast<std::size_t>(k)].b, cfg.beta_sd);
  }
  EXPECT_EQ(fits[1].spec.priors.at("hill_gamma")[0].a, fits[0].posterior_mean.at("hill_gamma")[0]);
  EXPECT_THROW(fit_sequence(split_waves(sc), ModelSpec::preset("longitudinal-hill"), cfg), ConfigError);
}

TEST(Poststratification, UniformWeightsConstantIntensity) {
  auto sc = ScenarioConfig::preset("small");
  sc.waves = 1;
  auto waves = split_waves(sc);
  auto spec = ModelSpec::preset("longitudinal-none");
  spec.time_gp.m = 0;
  const auto fit = fit_wave(waves[0], spec, quick());
  // All rows share one stratum profile, so the estimate is that profile's intensity.
  IndividualData strata = waves[0].data.subset({0, 0, 0});
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  const auto est = poststratified_mean(fit, strata, w, false);
  const auto one = poststratified_mean(fit, waves[0].data.subset({0}), Eigen::VectorXd::Ones(1), false);
  EXPECT_NEAR(est.median, one.median, 1e-12 * one.median);
  EXPECT_THROW(poststratified_mean(fit, strata, Eigen::VectorXd::Ones(2), false), DataError);
}

TEST(Poststratification, WeightsAreNormalised) {
  auto sc = ScenarioConfig::preset("small");
  sc.waves = 1;
  auto waves = split_waves(sc);
  auto spec = ModelSpec::preset("longitudinal-none");
  spec.time_gp.m = 0;
  const auto fit = fit_wave(waves[0], spec, quick());
  const auto strata = waves[0].data.subset({0, 1, 2, 3});
  const Eigen::Vector4d w(0.1, 0.2, 0.3, 0.4);
  const auto e1 = poststratified_mean(fit, strata, w, false);
  const auto e2 = poststratified_mean(fit, strata, 2.0 * w, false);
  EXPECT_NEAR(e2.median, e1.median, 1e-12 * e1.median);
  EXPECT_NEAR(e2.lower, e1.lower, 1e-12 * e1.lower);
  EXPECT_GT(e1.median, 0.0);
}

TEST(Bootstrap, ConstantCountsGiveZeroWidth) {
  std::vector<SurveyRecord> records(50);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].participant_id = "P" + std::to_string(i);
    records[i].contacts = 6;
  }
  const auto est = bootstrap_mean(records, 200, Eigen::VectorXd::Constant(50, 1.0 / 50), 1);
  EXPECT_DOUBLE_EQ(est.median, 6.0);
  EXPECT_DOUBLE_EQ(est.lower, 6.0);
  EXPECT_DOUBLE_EQ(est.upper, 6.0);
}

TEST(Bootstrap, ResamplesParticipantsNotRows) {
  // Two participants with two rows each; a row-level bootstrap could mix a
  // participant's rows, a participant-level one only yields 0, 5 or 10.
  std::vector<SurveyRecord> records(4);
  for (int i = 0; i < 4; ++i) {
    records[static_cast<std::size_t>(i)].participant_id = i < 2 ? "A" : "B";
    records[static_cast<std::size_t>(i)].contacts = i < 2 ? 0 : 10;
  }
  const auto est = bootstrap_mean(records, 500, Eigen::VectorXd::Constant(4, 0.25), 2);
  for (double v : {est.median, est.lower, est.upper}) EXPECT_TRUE(v == 0.0 || v == 5.0 || v == 10.0) << v;
}

TEST(Strata, MissingShareIsAnError) {
  std::vector<SurveyRecord> records(1);
  records[0].age = 30;
  records[0].sex = "F";
  records[0].household_size = "2";
  EXPECT_THROW(stratum_weights(records, {{"nope", 1.0}}), DataError);
  EXPECT_EQ(stratum_weights(records, {})[0], 1.0);
}

TEST(Study, FirstCapMatchesBaseline) {
  auto sc = ScenarioConfig::preset("small");
  sc.waves = 2;
  const auto sim = simulate_panel(sc);
  std::vector<SurveyRecord> rows;
  for (const auto& r : sim.records) {
    if (r.wave == 2) rows.push_back(r);
  }
  auto spec = ModelSpec::preset("gam");
  spec.age_gp.m = 6;
  StudyConfig cfg;
  cfg.caps = {0};
  cfg.sampler = quick();
  cfg.ages = {10, 40, 70};
  const auto out = incremental_inclusion_study(design_for(rows), spec, spec, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].mape_unadjusted, 0.0);
  EXPECT_EQ(out[0].coverage_unadjusted, 1.0);

  std::vector<SurveyRecord> repeaters;
  for (const auto& r : rows) {
    if (r.repeat > 0) repeaters.push_back(r);
  }
  EXPECT_THROW(incremental_inclusion_study(design_for(repeaters), spec, spec, cfg), DataError);
}

}  // namespace
}  // namespace brc
