#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "brc/kernels.hpp"

namespace brc {
namespace {

TEST(Kernels, PlugInValues) {
  EXPECT_DOUBLE_EQ(kernel_eval({KernelFamily::matern32, 2.0, 1.0}, 0.3, 0.3), 2.0);
  EXPECT_NEAR(kernel_eval({KernelFamily::squared_exponential, 1.0, 1.0}, 0.0, std::sqrt(2.0)), std::exp(-1.0), 1e-15);
}

TEST(Kernels, FamilyNamesRoundTrip) {
  for (auto f : {KernelFamily::squared_exponential, KernelFamily::matern32, KernelFamily::matern52}) {
    EXPECT_EQ(kernel_family_from_string(to_string(f)), f);
  }
}

TEST(SpectralDensity, SquaredExponentialAtZero) {
  const double w[1] = {0.0};
  EXPECT_NEAR(spectral_density({KernelFamily::squared_exponential, 1.0, 1.0}, w), std::sqrt(2.0 * std::numbers::pi),
              1e-12);
}

TEST(Hsgp, FirstFrequency) {
  const std::vector<double> x = {-0.5, 0.5};
  const auto basis = build_hsgp_1d(x, 3, 2.0);
  EXPECT_DOUBLE_EQ(basis.boundary(), 1.0);
  EXPECT_NEAR(basis.frequencies[0][0], std::numbers::pi / 2.0, 1e-15);
}

TEST(Hsgp, SymmetricColumnCount) {
  const std::vector<double> g = {0.0, 1.0, 2.0};
  EXPECT_EQ(build_hsgp_2d_symmetric(g, g, 2, 1.5).size(), 3);
  EXPECT_EQ(build_hsgp_2d_symmetric(g, g, 6, 1.5).size(), 21);
}

TEST(Hsgp, SymmetricSurfaceIsSymmetric) {
  std::vector<double> g;
  for (int a = 0; a < 20; ++a) g.push_back(a);
  const auto basis = build_hsgp_2d_symmetric(g, g, 5, 1.5);
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(basis.size(), -1.3, 2.1);
  const Eigen::VectorXd f = realize(basis, {KernelFamily::matern52, 1.0, 4.0}, w);
  double worst = 0.0;
  for (int a = 0; a < 20; ++a) {
    for (int b = 0; b < 20; ++b) worst = std::max(worst, std::abs(f[a * 20 + b] - f[b * 20 + a]));
  }
  EXPECT_EQ(worst, 0.0);
}

TEST(Hsgp, ZeroWeightsGiveZero) {
  const std::vector<double> x = {0.0, 0.5, 1.0};
  const auto basis = build_hsgp_1d(x, 8, 1.5);
  EXPECT_EQ(realize(basis, {KernelFamily::squared_exponential, 1.0, 1.0}, Eigen::VectorXd::Zero(8)).norm(), 0.0);
}

TEST(Hsgp, CovarianceIsLinearInMagnitude) {
  std::vector<double> x;
  for (int i = 0; i < 11; ++i) x.push_back(i * 0.1);
  const auto basis = build_hsgp_1d(x, 10, 1.5);
  const auto c1 = hsgp_covariance(basis, {KernelFamily::matern32, 0.7, 0.3});
  const auto c4 = hsgp_covariance(basis, {KernelFamily::matern32, 2.8, 0.3});
  EXPECT_LT((c4 - 4.0 * c1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Hsgp, EvaluateMatchesGridRows) {
  const std::vector<double> x = {-2.0, -0.5, 1.0, 3.0};
  const auto basis = build_hsgp_1d(x, 6, 1.5);
  EXPECT_LT((basis.evaluate(x) - basis.phi).cwiseAbs().maxCoeff(), 1e-14);
}

}  // namespace
}  // namespace brc
