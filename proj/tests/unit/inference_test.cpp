#include <gtest/gtest.h>

#include <cmath>

#include "brc/inference.hpp"

namespace brc {
namespace {

class Quadratic : public LogDensity {
 public:
  explicit Quadratic(Eigen::VectorXd centre) : c_(std::move(centre)) {}
  Eigen::Index dim() const override { return c_.size(); }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
    if (grad) *grad = c_ - x;
    return -0.5 * (x - c_).squaredNorm();
  }

 private:
  Eigen::VectorXd c_;
};

TEST(MapFit, QuadraticOptimum) {
  const Eigen::Vector3d c(1.0, -2.0, 0.5);
  const auto r = map_fit(Quadratic(c), 2, 7);
  EXPECT_LT((r.theta - c).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MapFit, PoissonInterceptIsLogMean) {
  IndividualData d;
  const int n = 4;
  d.baseline = Eigen::MatrixXd(n, 0);
  d.tested = Eigen::MatrixXd(n, 0);
  d.fatigue = Eigen::MatrixXd::Ones(n, 1);
  d.fatigue_names = {"all"};
  d.age = Eigen::VectorXd::Zero(n);
  d.repeat = Eigen::VectorXi::Zero(n);
  d.wave = Eigen::VectorXi::Ones(n);
  d.offset = Eigen::VectorXd::Zero(n);
  d.y = Eigen::Vector4i(2, 6, 3, 5);
  auto spec = ModelSpec::preset("stage1-refit");
  spec.priors["beta0"] = {PriorSpec::normal(0.0, 1e8)};
  const IndividualModel m(spec, d);
  const auto r = map_fit(m, 1, 3);
  EXPECT_NEAR(r.theta[0], std::log(4.0), 1e-6);
}

TEST(Diagnostics, SeparatedChainsHaveLargeRhat) {
  Eigen::MatrixXd draws(200, 2);
  for (int i = 0; i < 200; ++i) {
    draws(i, 0) = std::sin(i * 0.7);
    draws(i, 1) = 10.0 + std::cos(i * 1.3);
  }
  EXPECT_GT(split_rhat(draws), 2.0);
}

TEST(Diagnostics, IndependentDrawsHaveRhatNearOne) {
  auto rng = make_rng(11);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd draws(1000, 4);
  for (Eigen::Index i = 0; i < draws.size(); ++i) draws.data()[i] = normal(rng);
  EXPECT_LT(split_rhat(draws), 1.01);
  EXPECT_GT(ess_bulk(draws), 3000.0);
}

TEST(Quantiles, Basics) {
  const std::vector<double> v = {3.0, 1.0, 2.0};
  EXPECT_EQ(quantile(v, 0.5), 2.0);
  EXPECT_EQ(quantile(v, 0.0), 1.0);
  EXPECT_EQ(quantile(v, 1.0), 3.0);
  EXPECT_EQ(quantile(std::vector<double>{1.0, 2.0}, 0.25), 1.25);
}

TEST(Sampler, SymmetricIntervalsAndDeterminism) {
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 300;
  cfg.sampling = 1000;
  cfg.seed = 99;
  const Quadratic q(Eigen::VectorXd::Zero(2));
  const auto a = sample(q, cfg);
  const auto b = sample(q, cfg);
  EXPECT_EQ(a.draws.outputs, b.draws.outputs);
  const auto s = summarize(a.draws);
  for (const auto& p : s) {
    EXPECT_NEAR(p.median, 0.0, 0.15);
    EXPECT_NEAR(p.values[3] - p.median, p.median - p.values[1], 0.15);
  }
}

TEST(Sampler, ThreadCountDoesNotChangeDraws) {
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.warmup = 100;
  cfg.sampling = 100;
  const Quadratic q(Eigen::Vector3d(1.0, 2.0, 3.0));
  cfg.threads = 1;
  const auto a = sample(q, cfg);
  cfg.threads = 3;
  const auto b = sample(q, cfg);
  EXPECT_EQ(a.draws.outputs, b.draws.outputs);
}

}  // namespace
}  // namespace brc
