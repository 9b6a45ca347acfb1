#include "brc/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "brc/config.hpp"
#include "brc/error.hpp"

namespace brc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// log Phi(x), stable in the lower tail.
double log_normal_cdf(double x) { return std::log(0.5 * boost::math::erfc(-x / std::numbers::sqrt2)); }

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

struct FamilyName {
  PriorFamily family;
  const char* name;
  int arity;
};

constexpr FamilyName kNames[] = {
    {PriorFamily::normal, "normal", 2},           {PriorFamily::half_normal_pos, "half_normal_pos", 2},
    {PriorFamily::half_normal_neg, "half_normal_neg", 2}, {PriorFamily::cauchy_pos, "cauchy_pos", 2},
    {PriorFamily::inv_gamma, "inv_gamma", 2},     {PriorFamily::exponential, "exponential", 1},
    {PriorFamily::gamma, "gamma", 2},             {PriorFamily::student_t_pos, "student_t_pos", 2},
};

}  // namespace

bool PriorSpec::positive_support() const {
  return family != PriorFamily::normal && family != PriorFamily::half_normal_neg;
}

void PriorSpec::validate() const {
  auto bad = [&](const char* what) { throw ConfigError(to_string() + ": " + what); };
  if (!std::isfinite(a) || !std::isfinite(b)) bad("parameters must be finite");
  switch (family) {
    case PriorFamily::normal:
    case PriorFamily::half_normal_pos:
    case PriorFamily::half_normal_neg:
    case PriorFamily::cauchy_pos:
      if (!(b > 0.0)) bad("scale must be positive");
      break;
    case PriorFamily::inv_gamma:
    case PriorFamily::gamma:
    case PriorFamily::student_t_pos:
      if (!(a > 0.0) || !(b > 0.0)) bad("shape and scale must be positive");
      break;
    case PriorFamily::exponential:
      if (!(a > 0.0)) bad("rate must be positive");
      break;
  }
}

std::string PriorSpec::to_string() const {
  for (const auto& n : kNames) {
    if (n.family != family) continue;
    std::string out = std::string(n.name) + "(" + format_double(a);
    if (n.arity == 2) out += ", " + format_double(b);
    return out + ")";
  }
  return "unknown";
}

PriorSpec PriorSpec::parse(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\t') s += c;
  }
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') throw ConfigError("malformed prior '" + text + "'");
  const std::string name = s.substr(0, open);
  const std::string args = s.substr(open + 1, s.size() - open - 2);
  for (const auto& n : kNames) {
    if (name != n.name) continue;
    PriorSpec p;
    p.family = n.family;
    try {
      const auto comma = args.find(',');
      if (n.arity == 1) {
        if (comma != std::string::npos) throw ConfigError("too many arguments");
        p.a = std::stod(args);
        p.b = 0.0;
      } else {
        if (comma == std::string::npos) throw ConfigError("too few arguments");
        p.a = std::stod(args.substr(0, comma));
        p.b = std::stod(args.substr(comma + 1));
      }
    } catch (const std::exception&) {
      throw ConfigError("malformed prior arguments in '" + text + "'");
    }
    p.validate();
    return p;
  }
  throw ConfigError("unknown prior family '" + name + "'");
}

ScalarLogDensity log_prior(const PriorSpec& spec, double theta) {
  const double a = spec.a, b = spec.b;
  switch (spec.family) {
    case PriorFamily::normal:
      return {normal_logpdf(theta, a, b), -(theta - a) / (b * b)};
    case PriorFamily::half_normal_pos:
      if (!(theta > 0.0)) return {-kInf, 0.0};
      return {normal_logpdf(theta, a, b) - log_normal_cdf(a / b), -(theta - a) / (b * b)};
    case PriorFamily::half_normal_neg:
      if (!(theta < 0.0)) return {-kInf, 0.0};
      return {normal_logpdf(theta, a, b) - log_normal_cdf(-a / b), -(theta - a) / (b * b)};
    case PriorFamily::cauchy_pos: {
      if (!(theta > 0.0)) return {-kInf, 0.0};
      const double z = (theta - a) / b;
      const double mass = 0.5 + std::atan(a / b) / std::numbers::pi;
      return {-std::log(std::numbers::pi * b * (1.0 + z * z)) - std::log(mass), -2.0 * z / (b * (1.0 + z * z))};
    }
    case PriorFamily::inv_gamma:
      if (!(theta > 0.0)) return {-kInf, 0.0};
      return {a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(theta) - b / theta,
              -(a + 1.0) / theta + b / (theta * theta)};
    case PriorFamily::exponential:
      if (!(theta >= 0.0)) return {-kInf, 0.0};
      return {std::log(a) - a * theta, -a};
    case PriorFamily::gamma:
      if (!(theta > 0.0)) return {-kInf, 0.0};
      return {a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(theta) - b * theta, (a - 1.0) / theta - b};
    case PriorFamily::student_t_pos: {
      if (!(theta > 0.0)) return {-kInf, 0.0};
      const double nu = a, s = b;
      const double u = theta / s;
      const double logp = std::log(2.0) + std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                          0.5 * std::log(nu * std::numbers::pi) - std::log(s) -
                          0.5 * (nu + 1.0) * std::log1p(u * u / nu);
      return {logp, -(nu + 1.0) * theta / (nu * s * s + theta * theta)};
    }
  }
  return {-kInf, 0.0};
}

// --------------------------------------------------------------------------
// Regularised horseshoe

double half_normal_variance_correction() { return 1.0 / (1.0 - 2.0 / std::numbers::pi); }

double RhsSpec::eps0() const { return p0 / (K - p0) / n; }

void RhsSpec::validate() const {
  if (K < 1) throw ConfigError("horseshoe needs at least one coefficient");
  if (!(p0 > 0.0 && p0 < K)) throw ConfigError("horseshoe p0 must lie in (0, K)");
  if (n < 1) throw ConfigError("horseshoe sample size must be positive");
  if (!(nu_local > 0.0 && nu_slab > 0.0 && nu_global > 0.0 && slab_scale2 > 0.0)) {
    throw ConfigError("horseshoe degrees of freedom and slab scale must be positive");
  }
}

PriorSpec RhsSpec::slab_prior() const {
  const double scale = 0.5 * nu_slab * slab_scale2;
  return slab == SlabPrior::inverse_gamma ? PriorSpec::inv_gamma(nu_slab, scale) : PriorSpec::gamma(nu_slab, scale);
}

double rhs_regularized_local2(double local, double slab2, double global) {
  const double l2 = local * local;
  return slab2 * l2 / (slab2 + global * global * l2);
}

namespace {

// d log s / d log(local or global), and d log s / d log slab2, for s = eps * zt.
struct ScaleSensitivity {
  double scale;
  double dlog_local_global;
  double dlog_slab2;
};

ScaleSensitivity scale_sensitivity(double local, double slab2, double global) {
  const double e2z2 = global * global * local * local;
  const double D = slab2 + e2z2;
  return {global * std::sqrt(rhs_regularized_local2(local, slab2, global)), 1.0 - e2z2 / D, 0.5 * e2z2 / D};
}

double hyper_log_prior(const RhsSpec& spec, const Eigen::VectorXd& local, double slab2, double global,
                       Eigen::VectorXd& d_local, double& d_slab2, double& d_global) {
  double lp = 0.0;
  const auto lprior = spec.local_prior();
  d_local.resize(local.size());
  for (Eigen::Index k = 0; k < local.size(); ++k) {
    const auto r = log_prior(lprior, local[k]);
    lp += r.logp;
    d_local[k] = r.grad;
  }
  const auto rs = log_prior(spec.slab_prior(), slab2);
  const auto rg = log_prior(spec.global_prior(), global);
  d_slab2 = rs.grad;
  d_global = rg.grad;
  return lp + rs.logp + rg.logp;
}

}  // namespace

RhsLogDensity rhs_log_prior(const RhsSpec& spec, const Eigen::VectorXd& beta, const Eigen::VectorXd& local,
                            double slab2, double global) {
  spec.validate();
  if (beta.size() != spec.K || local.size() != spec.K) throw ConfigError("horseshoe dimension mismatch");
  RhsLogDensity out;
  out.logp = hyper_log_prior(spec, local, slab2, global, out.d_local, out.d_slab2, out.d_global);
  out.d_beta.resize(spec.K);
  const bool negative = spec.sign == RhsSign::negative;
  const double kappa2 = negative ? half_normal_variance_correction() : 1.0;
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    const auto s = scale_sensitivity(local[k], slab2, global);
    if (negative && !(beta[k] <= 0.0)) {
      out.logp = -kInf;
      continue;
    }
    // Negative sign: beta = -s kappa |z|, a half-normal with scale s kappa on (-inf, 0].
    const double sd = s.scale * std::sqrt(kappa2);
    const double z = beta[k] / sd;
    out.logp += -0.5 * z * z - std::log(sd) - kHalfLog2Pi + (negative ? std::log(2.0) : 0.0);
    out.d_beta[k] = -beta[k] / (sd * sd);
    const double dlog_sd = z * z - 1.0;
    out.d_local[k] += dlog_sd * s.dlog_local_global / local[k];
    out.d_global += dlog_sd * s.dlog_local_global / global;
    out.d_slab2 += dlog_sd * s.dlog_slab2 / slab2;
  }
  return out;
}

RhsBlock::RhsBlock(const RhsSpec& spec, Eigen::VectorXd z, Eigen::VectorXd local, double slab2, double global)
    : spec_(spec), z_(std::move(z)), local_(std::move(local)), slab2_(slab2), global_(global) {
  if (z_.size() != spec_.K || local_.size() != spec_.K) throw ConfigError("horseshoe dimension mismatch");
  coef_.resize(spec_.K);
  scale_.resize(spec_.K);
  const double kappa = std::sqrt(half_normal_variance_correction());
  logp_ = 0.0;
  for (Eigen::Index k = 0; k < spec_.K; ++k) {
    scale_[k] = global_ * std::sqrt(rhs_regularized_local2(local_[k], slab2_, global_));
    if (spec_.sign == RhsSign::negative) {
      if (!(z_[k] >= 0.0)) throw ConfigError("negative horseshoe needs z >= 0");
      coef_[k] = -scale_[k] * kappa * z_[k];
      logp_ += -0.5 * z_[k] * z_[k] - kHalfLog2Pi + std::log(2.0);
    } else {
      coef_[k] = scale_[k] * z_[k];
      logp_ += -0.5 * z_[k] * z_[k] - kHalfLog2Pi;
    }
  }
  Eigen::VectorXd dl;
  double ds = 0.0, dg = 0.0;
  logp_ += hyper_log_prior(spec_, local_, slab2_, global_, dl, ds, dg);
}

RhsBlock::Gradient RhsBlock::gradient(const Eigen::VectorXd& d_coef) const {
  Gradient g;
  hyper_log_prior(spec_, local_, slab2_, global_, g.d_local, g.d_slab2, g.d_global);
  g.d_z.resize(spec_.K);
  const double kappa = std::sqrt(half_normal_variance_correction());
  for (Eigen::Index k = 0; k < spec_.K; ++k) {
    const auto s = scale_sensitivity(local_[k], slab2_, global_);
    const double dcoef_z = spec_.sign == RhsSign::negative ? -scale_[k] * kappa : scale_[k];
    g.d_z[k] = -z_[k] + d_coef[k] * dcoef_z;
    // coef is proportional to s, so d coef / d log s = coef.
    const double dlog_s = d_coef[k] * coef_[k];
    g.d_local[k] += dlog_s * s.dlog_local_global / local_[k];
    g.d_global += dlog_s * s.dlog_local_global / global_;
    g.d_slab2 += dlog_s * s.dlog_slab2 / slab2_;
  }
  return g;
}

RhsBlock half_rhs_neg(RhsSpec spec, Eigen::VectorXd z, Eigen::VectorXd local, double slab2, double global) {
  spec.sign = RhsSign::negative;
  return RhsBlock(spec, std::move(z), std::move(local), slab2, global);
}

}  // namespace brc
