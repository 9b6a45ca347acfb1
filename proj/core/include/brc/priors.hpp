#pragma once

#include <Eigen/Dense>

#include <string>

namespace brc {

enum class PriorFamily {
  normal,           ///< (mean, sd)
  half_normal_pos,  ///< normal(mean, sd) truncated to (0, inf)
  half_normal_neg,  ///< normal(mean, sd) truncated to (-inf, 0)
  cauchy_pos,       ///< cauchy(location, scale) truncated to (0, inf)
  inv_gamma,        ///< (shape, scale)
  exponential,      ///< (rate)
  gamma,            ///< (shape, rate)
  student_t_pos,    ///< student-t(dof, 0, scale) truncated to (0, inf)
};

/// Normal and Cauchy scale parameters are standard deviations, never variances.
struct PriorSpec {
  PriorFamily family = PriorFamily::normal;
  double a = 0.0;
  double b = 1.0;

  static PriorSpec normal(double mean, double sd) { return {PriorFamily::normal, mean, sd}; }
  static PriorSpec half_normal_pos(double mean, double sd) { return {PriorFamily::half_normal_pos, mean, sd}; }
  static PriorSpec half_normal_neg(double mean, double sd) { return {PriorFamily::half_normal_neg, mean, sd}; }
  static PriorSpec cauchy_pos(double location, double scale) { return {PriorFamily::cauchy_pos, location, scale}; }
  static PriorSpec inv_gamma(double shape, double scale) { return {PriorFamily::inv_gamma, shape, scale}; }
  static PriorSpec exponential(double rate) { return {PriorFamily::exponential, rate, 0.0}; }
  static PriorSpec gamma(double shape, double rate) { return {PriorFamily::gamma, shape, rate}; }
  static PriorSpec student_t_pos(double dof, double scale) { return {PriorFamily::student_t_pos, dof, scale}; }

  /// True when the density lives on (0, inf) and the parameter is sampled on the log scale.
  bool positive_support() const;
  void validate() const;

  /// e.g. "normal(0, 10)"; round-trips through parse().
  std::string to_string() const;
  static PriorSpec parse(const std::string& text);

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

struct ScalarLogDensity {
  double logp = 0.0;
  double grad = 0.0;
};

/// Normalised log density and its derivative. Outside the support the result
/// is {-inf, 0}.
ScalarLogDensity log_prior(const PriorSpec& spec, double theta);

// --------------------------------------------------------------------------
// Regularised horseshoe

enum class SlabPrior { inverse_gamma, gamma };
enum class RhsSign { unconstrained, negative };

/// (1 - 2/pi)^{-1}: variance correction for the half-normal latent.
double half_normal_variance_correction();

struct RhsSpec {
  int K = 1;
  double nu_local = 3.0;   ///< nu_1
  double nu_slab = 2.0;    ///< nu_2
  double nu_global = 4.0;  ///< nu_3
  double slab_scale2 = 2.0;  ///< s^2
  double p0 = 0.5;
  int n = 1;
  RhsSign sign = RhsSign::unconstrained;
  SlabPrior slab = SlabPrior::inverse_gamma;

  /// p0 / (K - p0) / n
  double eps0() const;
  void validate() const;

  /// Prior on c^2: inverse-gamma or gamma(nu_2, nu_2 s^2 / 2).
  PriorSpec slab_prior() const;
  PriorSpec local_prior() const { return PriorSpec::student_t_pos(nu_local, 1.0); }
  PriorSpec global_prior() const { return PriorSpec::student_t_pos(nu_global, eps0()); }
};

/// zeta_tilde^2 = c^2 zeta^2 / (c^2 + eps^2 zeta^2)
double rhs_regularized_local2(double local, double slab2, double global);

struct RhsLogDensity {
  double logp = 0.0;
  Eigen::VectorXd d_beta;
  Eigen::VectorXd d_local;
  double d_slab2 = 0.0;
  double d_global = 0.0;
};

/// Centred joint density of beta_k ~ N(0, eps^2 zt_k^2) and all hyperpriors.
RhsLogDensity rhs_log_prior(const RhsSpec& spec, const Eigen::VectorXd& beta, const Eigen::VectorXd& local,
                            double slab2, double global);

/**
 * Non-centred horseshoe block.
 *
 * Latents: z (standard normal), local scales zeta, slab c^2 and global eps.
 * Coefficients are beta_k = eps zt_k z_k. The negative-sign variant takes
 * z_k >= 0 (half-normal) and gamma_k = -eps zt_k z_k sqrt((1 - 2/pi)^{-1}),
 * which keeps the conditional variance at eps^2 zt_k^2.
 */
class RhsBlock {
 public:
  RhsBlock(const RhsSpec& spec, Eigen::VectorXd z, Eigen::VectorXd local, double slab2, double global);

  const Eigen::VectorXd& coefficients() const { return coef_; }
  /// eps * zt_k
  const Eigen::VectorXd& scales() const { return scale_; }
  /// Log prior of all latents (not including log-transform Jacobians).
  double log_prior() const { return logp_; }

  struct Gradient {
    Eigen::VectorXd d_z;
    Eigen::VectorXd d_local;
    double d_slab2 = 0.0;
    double d_global = 0.0;
  };
  /// Gradient of log_prior() + (upstream terms with d/dcoef = d_coef).
  Gradient gradient(const Eigen::VectorXd& d_coef) const;

 private:
  RhsSpec spec_;
  Eigen::VectorXd z_, local_;
  double slab2_, global_;
  Eigen::VectorXd coef_, scale_;
  double logp_ = 0.0;
};

/// Stage-2 prior: RhsBlock with the sign forced to negative.
RhsBlock half_rhs_neg(RhsSpec spec, Eigen::VectorXd z, Eigen::VectorXd local, double slab2, double global);

}  // namespace brc
