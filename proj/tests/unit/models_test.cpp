#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "brc/error.hpp"
#include "brc/models.hpp"
#include "brc/rng.hpp"
#include "brc/simulator.hpp"

namespace brc {
namespace {

IndividualData toy(const std::vector<int>& y, const std::vector<int>& repeat) {
  const auto n = static_cast<Eigen::Index>(y.size());
  IndividualData d;
  d.baseline = Eigen::MatrixXd(n, 0);
  d.tested = Eigen::MatrixXd(n, 0);
  d.fatigue = Eigen::MatrixXd::Ones(n, 1);
  d.fatigue_names = {"all"};
  d.age = Eigen::VectorXd::Constant(n, 30.0);
  d.repeat = Eigen::Map<const Eigen::VectorXi>(repeat.data(), n);
  d.wave = Eigen::VectorXi::Ones(n);
  d.offset = Eigen::VectorXd::Zero(n);
  d.y = Eigen::Map<const Eigen::VectorXi>(y.data(), n);
  return d;
}

TEST(Hill, PlugIn) {
  EXPECT_DOUBLE_EQ(hill({1.0, 0.0, 1.0}, 1.0), -0.5);
  for (double eta : {0.3, 1.0, 4.0}) EXPECT_EQ(hill({0.9, -1.0, eta}, 0.0), 0.0);
}

TEST(Hill, GradientMatchesDifference) {
  const HillCurve c{0.88, -1.55, 0.94};
  const auto g = hill_gradient(c, 3.0);
  const double h = 1e-6;
  EXPECT_NEAR(g.d_gamma, (hill({c.gamma + h, c.zeta, c.eta}, 3) - hill({c.gamma - h, c.zeta, c.eta}, 3)) / (2 * h), 1e-8);
  EXPECT_NEAR(g.d_zeta, (hill({c.gamma, c.zeta + h, c.eta}, 3) - hill({c.gamma, c.zeta - h, c.eta}, 3)) / (2 * h), 1e-8);
  EXPECT_NEAR(g.d_eta, (hill({c.gamma, c.zeta, c.eta + h}, 3) - hill({c.gamma, c.zeta, c.eta - h}, 3)) / (2 * h), 1e-8);
}

TEST(CountModels, NegativeBinomialVariance) {
  auto rng = make_rng(1234);
  const double mu = 2.0, phi = 1.0;
  std::gamma_distribution<double> gamma(phi, mu / phi);
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = std::poisson_distribution<int>(gamma(rng))(rng);
    s += y;
    s2 += y * y;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var / (mu + mu * mu / phi), 1.0, 0.01);
  // The pmf itself has the same variance.
  double m1 = 0.0, m2 = 0.0;
  for (int y = 0; y < 400; ++y) {
    const double p = std::exp(nb_logpmf(y, mu, phi, Observation::nb2).logp);
    m1 += y * p;
    m2 += y * y * p;
  }
  EXPECT_NEAR(m2 - m1 * m1, 6.0, 1e-9);
}

TEST(CountModels, PoissonLimit) {
  EXPECT_NEAR(nb_logpmf(3, 2.0, 1e6, Observation::nb2).logp, poisson_logpmf(3, 2.0).logp, 1e-4);
}

TEST(CountModels, NegativeCountIsAnError) { EXPECT_THROW(nb_logpmf(-1, 2.0, 1.0, Observation::nb2), DataError); }

TEST(CountModels, PmfGradients) {
  for (auto kind : {Observation::nb1, Observation::nb2}) {
    const double h = 1e-6;
    const auto v = nb_logpmf(4, 2.5, 0.7, kind);
    EXPECT_NEAR(v.d_mean, (nb_logpmf(4, 2.5 + h, 0.7, kind).logp - nb_logpmf(4, 2.5 - h, 0.7, kind).logp) / (2 * h), 1e-7);
    EXPECT_NEAR(v.d_dispersion,
                (nb_logpmf(4, 2.5, 0.7 + h, kind).logp - nb_logpmf(4, 2.5, 0.7 - h, kind).logp) / (2 * h), 1e-7);
  }
}

TEST(Likelihood, SinglePoissonRow) {
  const IndividualModel m(ModelSpec::preset("stage1-refit"), toy({3}, {0}));
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(m.dim());
  EXPECT_NEAR(m.pointwise_loglik(theta)[0], -1.0 - std::log(6.0), 1e-12);
}

TEST(Likelihood, EmptyDataIsPriorOnly) {
  const IndividualModel m(ModelSpec::preset("stage1-refit"), toy({}, {}));
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(m.dim(), 0.4), g;
  const double lp = m.log_posterior(theta, &g);
  // beta0 ~ normal(0, 100)
  EXPECT_NEAR(lp, -0.5 * 0.004 * 0.004 - std::log(100.0) - 0.5 * std::log(2 * M_PI), 1e-12);
  EXPECT_NEAR(g[0], -0.4 / 1e4, 1e-15);
}

TEST(Fatigue, VariantTerms) {
  EXPECT_DOUBLE_EQ(fatigue_variant_term(FatigueKind::variant_a, 1, {}), -1.0);
  EXPECT_EQ(fatigue_variant_term(FatigueKind::variant_c, 0, {0.5, 0.1, 0.2, 0.3}), 0.0);
  FatigueLatents l{0.2, -0.1, 0.3, 0.05};
  EXPECT_LT(fatigue_variant_term(FatigueKind::variant_b, 2, l), 0.0);
  EXPECT_DOUBLE_EQ(fatigue_variant_term(FatigueKind::variant_b, 2, l), -std::exp(0.2 - 0.1 + 0.3));
}

TEST(Fatigue, KindNamesRoundTrip) {
  for (auto k : {FatigueKind::none, FatigueKind::hill, FatigueKind::variant_c, FatigueKind::gp_on_repeats}) {
    EXPECT_EQ(fatigue_kind_from_string(to_string(k)), k);
  }
}

TEST(Debias, FirstTimersUnchangedAndRatioIsHill) {
  auto spec = ModelSpec::preset("longitudinal-hill");
  spec.time_gp.m = 0;
  const IndividualModel m(spec, toy({2, 1, 3}, {0, 4, 1000000}));
  auto values = m.layout().unpack(Eigen::VectorXd::Zero(m.dim()));
  values["hill_gamma"] = Eigen::VectorXd::Constant(1, 0.7);
  values["hill_zeta"] = Eigen::VectorXd::Constant(1, 0.0);
  values["hill_eta"] = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd theta = m.layout().pack(values);
  const auto raw = m.predict_log_intensity(theta, m.data(), false);
  const auto deb = m.predict_log_intensity(theta, m.data(), true);
  EXPECT_EQ(raw[0], deb[0]);
  EXPECT_NEAR(deb[2] - raw[2], 0.7, 1e-9);
}

TEST(Presets, AllBuildAndRoundTrip) {
  for (const char* name : {"stage1", "stage1-refit", "stage2", "longitudinal-none", "longitudinal-independent",
                           "longitudinal-identical", "longitudinal-gp", "longitudinal-hill", "gam", "gam-hill",
                           "brc-original", "brc-a", "brc-b", "brc-c", "brc-hill", "brc-none"}) {
    const auto spec = ModelSpec::preset(name);
    EXPECT_NO_THROW(spec.validate()) << name;
    const auto back = ModelSpec::from_config(spec.to_config());
    EXPECT_EQ(back.to_config().to_string(), spec.to_config().to_string()) << name;
  }
  EXPECT_THROW(ModelSpec::preset("nope"), ConfigError);
}

TEST(BrcModel, FatigueTermsAreNegative) {
  auto scenario = BrcScenario::smooth_default(2);
  auto data = simulate_brc_surface(scenario).data;
  data.waves = 2;
  data.max_repeat = 2;
  data.missingness = MissingnessTable(2, data.ages, 1.0);
  for (const char* name : {"brc-a", "brc-b", "brc-c"}) {
    auto spec = ModelSpec::preset(name);
    spec.surface_gp.m = 5;
    spec.age_gp.m = 4;
    const BrcModel m(spec, data);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(m.dim(), 0.1);
    EXPECT_EQ(m.fatigue_term(theta, 0, 30, 3), 0.0);
    EXPECT_LT(m.fatigue_term(theta, 1, 30, 3), 0.0) << name;
  }
}

}  // namespace
}  // namespace brc
