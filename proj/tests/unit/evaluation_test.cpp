#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "brc/error.hpp"
#include "brc/evaluation.hpp"
#include "brc/rng.hpp"

namespace brc {
namespace {

using V = std::vector<double>;

TEST(Mape, Values) {
  EXPECT_DOUBLE_EQ(mape(V{1, 2}, V{1, 1}), 50.0);
  EXPECT_DOUBLE_EQ(mape(V{3, 4}, V{3, 4}), 0.0);
  EXPECT_NEAR(mape(V{1.1, 2.2, 3.3}, V{1, 2, 3}), 10.0, 1e-12);
  EXPECT_THROW(mape(V{1}, V{0}), DataError);
  EXPECT_THROW(mape(V{1, 2}, V{1}), DataError);
}

TEST(Coverage, Values) {
  EXPECT_EQ(interval_coverage(V{1, 2}, V{0, 0}, V{3, 3}), 1.0);
  EXPECT_EQ(interval_coverage(V{5, 6}, V{0, 0}, V{3, 3}), 0.0);
  EXPECT_EQ(interval_coverage(V{1, 6}, V{0, 0}, V{3, 3}), 0.5);
}

TEST(Mse, PerfectAndConstant) {
  const V y = {1, 4, 2};
  Eigen::MatrixXd exact(2, 3), constant = Eigen::MatrixXd::Constant(2, 3, 2.0);
  exact << 1, 4, 2, 1, 4, 2;
  EXPECT_EQ(mse_and_ppc(exact, exact, y).mse, 0.0);
  EXPECT_NEAR(mse_and_ppc(constant, constant, y).mse, (1.0 + 4.0 + 0.0) / 3.0, 1e-12);
}

TEST(Gpd, RecoversShapeRoughly) {
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double k = 0.4, sigma = 1.5;
  V x;
  for (int i = 0; i < 20000; ++i) x.push_back(sigma / k * (std::pow(1.0 - u(rng), -k) - 1.0));
  const auto fit = fit_generalized_pareto(x);
  EXPECT_NEAR(fit.k, k, 0.05);
  EXPECT_NEAR(fit.sigma, sigma, 0.1);
}

Eigen::MatrixXd normal_loglik(int S, int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal;
  V y(n);
  for (auto& v : y) v = normal(rng);
  Eigen::MatrixXd ll(S, n);
  for (int s = 0; s < S; ++s) {
    const double mu = normal(rng) / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) ll(s, i) = -0.5 * (y[i] - mu) * (y[i] - mu) - 0.5 * std::log(2 * M_PI);
  }
  return ll;
}

TEST(Loo, DuplicatedColumnsAddUp) {
  const Eigen::MatrixXd ll = normal_loglik(400, 6, 9);
  Eigen::MatrixXd twice(ll.rows(), 12);
  twice << ll, ll;
  const auto a = psis_loo(ll), b = psis_loo(twice);
  EXPECT_NEAR(b.elpd, 2.0 * a.elpd, 1e-9);
  EXPECT_EQ(b.pointwise.head(6), a.pointwise);
}

TEST(Loo, NeedsEnoughDraws) { EXPECT_THROW(psis_loo(Eigen::MatrixXd::Zero(20, 3)), DataError); }

TEST(Loo, CompareSortsBestFirst) {
  LooResult a, b;
  a.elpd = -120;
  a.pointwise = Eigen::VectorXd::Constant(4, -30);
  b.elpd = -100;
  b.pointwise = Eigen::VectorXd::Constant(4, -25);
  const auto rows = loo_compare({{"a", a}, {"b", b}});
  EXPECT_EQ(rows[0].model, "b");
  EXPECT_EQ(rows[0].delta, 0.0);
  EXPECT_EQ(rows[1].delta, -20.0);
}

}  // namespace
}  // namespace brc
