#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "brc/error.hpp"
#include "brc/priors.hpp"

namespace brc {
namespace {

TEST(Priors, NormalIsFlatAtItsMean) { EXPECT_EQ(log_prior(PriorSpec::normal(0.0, 10.0), 0.0).grad, 0.0); }

TEST(Priors, ExponentialPlugIn) {
  const auto v = log_prior(PriorSpec::exponential(1.0), 2.0);
  EXPECT_DOUBLE_EQ(v.logp, -2.0);
  EXPECT_DOUBLE_EQ(v.grad, -1.0);
}

TEST(Priors, OutsideSupport) {
  EXPECT_EQ(log_prior(PriorSpec::half_normal_pos(0.0, 1.0), -0.1).logp, -std::numeric_limits<double>::infinity());
}

TEST(Priors, GradientMatchesDifference) {
  const std::vector<std::pair<PriorSpec, double>> cases = {
      {PriorSpec::normal(1.0, 2.0), 0.3},         {PriorSpec::cauchy_pos(0.0, 1.0), 0.7},
      {PriorSpec::inv_gamma(5.0, 5.0), 1.4},      {PriorSpec::gamma(2.0, 3.0), 0.9},
      {PriorSpec::student_t_pos(3.0, 0.5), 0.2}, {PriorSpec::half_normal_neg(0.0, 1.0), -0.4},
  };
  for (const auto& [spec, x] : cases) {
    const double h = 1e-6;
    const double fd = (log_prior(spec, x + h).logp - log_prior(spec, x - h).logp) / (2 * h);
    EXPECT_NEAR(log_prior(spec, x).grad, fd, 1e-6) << spec.to_string();
  }
}

TEST(Priors, TextRoundTrip) {
  for (const auto& s : {PriorSpec::normal(0.0, 10.0), PriorSpec::inv_gamma(5.0, 1.0), PriorSpec::exponential(1.0)}) {
    EXPECT_EQ(PriorSpec::parse(s.to_string()), s);
  }
  EXPECT_THROW(PriorSpec::parse("normal(0, -1)"), ConfigError);
}

TEST(Horseshoe, GlobalScaleFormula) {
  RhsSpec s;
  s.p0 = 8;
  s.K = 16;
  s.n = 100;
  EXPECT_DOUBLE_EQ(s.eps0(), 0.01);
}

TEST(Horseshoe, LargeSlabRecoversPlainHorseshoe) {
  EXPECT_NEAR(rhs_regularized_local2(1.7, 1e14, 0.3), 1.7 * 1.7, 1e-10);
}

TEST(Horseshoe, VarianceCorrectionConstant) {
  EXPECT_NEAR(half_normal_variance_correction(), 2.75194, 1e-5);
  EXPECT_DOUBLE_EQ(half_normal_variance_correction(), 1.0 / (1.0 - 2.0 / std::numbers::pi));
}

TEST(Horseshoe, NegativeBlockIsNonPositive) {
  RhsSpec s;
  s.K = 3;
  s.sign = RhsSign::negative;
  const RhsBlock b(s, Eigen::Vector3d(0.1, 1.0, 2.0), Eigen::Vector3d(1.0, 0.5, 2.0), 2.0, 0.1);
  EXPECT_TRUE((b.coefficients().array() <= 0.0).all());
  EXPECT_THROW(RhsBlock(s, Eigen::Vector3d(-0.1, 1.0, 2.0), Eigen::Vector3d::Ones(), 2.0, 0.1), ConfigError);
}

TEST(Horseshoe, BlockGradientMatchesDifference) {
  RhsSpec s;
  s.K = 2;
  const Eigen::Vector2d z(0.4, -1.1), local(0.8, 1.9);
  const double slab2 = 1.7, global = 0.2;
  const Eigen::Vector2d up(0.3, -0.7);  // upstream d/dcoef
  auto f = [&](const Eigen::Vector2d& zz, const Eigen::Vector2d& ll, double c2, double g) {
    const RhsBlock b(s, zz, ll, c2, g);
    return b.log_prior() + up.dot(b.coefficients());
  };
  const auto grad = RhsBlock(s, z, local, slab2, global).gradient(up);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e[k] = h;
    EXPECT_NEAR(grad.d_z[k], (f(z + e, local, slab2, global) - f(z - e, local, slab2, global)) / (2 * h), 1e-6);
    EXPECT_NEAR(grad.d_local[k], (f(z, local + e, slab2, global) - f(z, local - e, slab2, global)) / (2 * h), 1e-6);
  }
  EXPECT_NEAR(grad.d_slab2, (f(z, local, slab2 + h, global) - f(z, local, slab2 - h, global)) / (2 * h), 1e-6);
  EXPECT_NEAR(grad.d_global, (f(z, local, slab2, global + h) - f(z, local, slab2, global - h)) / (2 * h), 1e-5);
}

}  // namespace
}  // namespace brc
