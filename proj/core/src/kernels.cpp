#include "brc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brc/error.hpp"

namespace brc {

namespace {

constexpr double kPi = std::numbers::pi;

double matern_nu(KernelFamily f) { return f == KernelFamily::matern32 ? 1.5 : 2.5; }

// log S_unit(q^2) and d log S_unit / d(q^2) for unit lengthscale and magnitude.
struct UnitSpectrum {
  double log_value;
  double dlog_dq2;
};

UnitSpectrum unit_spectrum(KernelFamily family, int d, double q2) {
  const double half_d = 0.5 * d;
  if (family == KernelFamily::squared_exponential) {
    return {half_d * std::log(2.0 * kPi) - 0.5 * q2, -0.5};
  }
  const double nu = matern_nu(family);
  const double log_c = d * std::log(2.0) + half_d * std::log(kPi) + std::lgamma(nu + half_d) + nu * std::log(2.0 * nu) -
                       std::lgamma(nu);
  return {log_c - (nu + half_d) * std::log(2.0 * nu + q2), -(nu + half_d) / (2.0 * nu + q2)};
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::squared_exponential: return "se";
    case KernelFamily::matern32: return "matern32";
    case KernelFamily::matern52: return "matern52";
  }
  return "se";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "se" || name == "squared_exponential") return KernelFamily::squared_exponential;
  if (name == "matern32") return KernelFamily::matern32;
  if (name == "matern52") return KernelFamily::matern52;
  throw ConfigError("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
  if (!(magnitude > 0.0) || !(lengthscale > 0.0)) throw ConfigError("kernel magnitude and lengthscale must be positive");
}

namespace {

double kernel_of_distance(const KernelSpec& spec, double dist) {
  const double r = dist / spec.lengthscale;
  switch (spec.family) {
    case KernelFamily::squared_exponential: return spec.magnitude * std::exp(-0.5 * r * r);
    case KernelFamily::matern32: {
      const double s = std::sqrt(3.0) * r;
      return spec.magnitude * (1.0 + s) * std::exp(-s);
    }
    case KernelFamily::matern52: {
      const double s = std::sqrt(5.0) * r;
      return spec.magnitude * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, double x, double x_prime) {
  return kernel_of_distance(spec, std::abs(x - x_prime));
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x_prime) {
  if (x.size() != x_prime.size()) throw ConfigError("kernel inputs differ in dimension");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - x_prime[i]) * (x[i] - x_prime[i]);
  return kernel_of_distance(spec, std::sqrt(d2));
}

SpectralValue spectral_density_ard(KernelFamily family, double magnitude, std::span<const double> lengthscales,
                                   std::span<const double> omega) {
  const int d = static_cast<int>(omega.size());
  if (d < 1 || d > 2 || lengthscales.size() != omega.size()) {
    throw ConfigError("spectral density needs 1 or 2 dimensions with one lengthscale each");
  }
  double q2 = 0.0;
  double log_l = 0.0;
  for (int i = 0; i < d; ++i) {
    q2 += lengthscales[i] * lengthscales[i] * omega[i] * omega[i];
    log_l += std::log(lengthscales[i]);
  }
  const auto u = unit_spectrum(family, d, q2);
  SpectralValue out;
  out.value = magnitude * std::exp(log_l + u.log_value);
  for (int i = 0; i < d; ++i) {
    out.dlog_lengthscale[i] = 1.0 + 2.0 * u.dlog_dq2 * lengthscales[i] * lengthscales[i] * omega[i] * omega[i];
  }
  return out;
}

double spectral_density(const KernelSpec& spec, std::span<const double> omega) {
  const double ls[2] = {spec.lengthscale, spec.lengthscale};
  return spectral_density_ard(spec.family, spec.magnitude, std::span<const double>(ls, omega.size()), omega).value;
}

// --------------------------------------------------------------------------
// Basis functions

double HsgpAxis::frequency(int j) const { return j * kPi / (2.0 * boundary); }

double HsgpAxis::eigenfunction(int j, double x) const {
  return std::sin(frequency(j) * (x - center + boundary)) / std::sqrt(boundary);
}

Eigen::MatrixXd HsgpAxis::evaluate(std::span<const double> x) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int j = 1; j <= m; ++j) out(static_cast<Eigen::Index>(i), j - 1) = eigenfunction(j, x[i]);
  }
  return out;
}

namespace {

HsgpAxis make_axis(double lo, double hi, int m, double c) {
  if (m < 1) throw ConfigError("HSGP basis size must be at least 1");
  if (!(c > 1.0)) throw ConfigError("HSGP boundary factor must exceed 1");
  HsgpAxis axis;
  axis.center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  axis.boundary = c * (half > 0.0 ? half : 1.0);
  axis.m = m;
  return axis;
}

std::pair<double, double> range_of(std::span<const double> x) {
  if (x.empty()) throw ConfigError("HSGP inputs are empty");
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return {*lo, *hi};
}

double sym_entry(const HsgpBasis& basis, Eigen::Index col, double pa_j, double pb_k, double pa_k, double pb_j) {
  const auto& ix = basis.index[col];
  if (ix[0] == ix[1]) return pa_j * pb_j;
  return (pa_j * pb_k + pa_k * pb_j) / std::numbers::sqrt2;
}

}  // namespace

HsgpBasis build_hsgp_1d(std::span<const double> inputs, int m, double c) {
  auto [lo, hi] = range_of(inputs);
  return build_hsgp_1d(inputs, m, c, lo, hi);
}

HsgpBasis build_hsgp_1d(std::span<const double> inputs, int m, double c, double domain_lo, double domain_hi) {
  HsgpBasis b;
  b.dim = 1;
  b.axes[0] = make_axis(domain_lo, domain_hi, m, c);
  b.phi = b.axes[0].evaluate(inputs);
  for (int j = 1; j <= m; ++j) {
    b.index.push_back({j, 0});
    b.frequencies.push_back({b.axes[0].frequency(j), 0.0});
  }
  return b;
}

HsgpBasis build_hsgp_2d(std::span<const double> grid_a, std::span<const double> grid_b, int m_a, int m_b, double c) {
  auto [lo_a, hi_a] = range_of(grid_a);
  auto [lo_b, hi_b] = range_of(grid_b);
  HsgpBasis b;
  b.dim = 2;
  b.axes[0] = make_axis(lo_a, hi_a, m_a, c);
  b.axes[1] = make_axis(lo_b, hi_b, m_b, c);
  b.phi_a = b.axes[0].evaluate(grid_a);
  b.phi_b = b.axes[1].evaluate(grid_b);
  const Eigen::Index na = b.phi_a.rows(), nb = b.phi_b.rows();
  b.phi.resize(na * nb, static_cast<Eigen::Index>(m_a) * m_b);
  for (int j = 1; j <= m_a; ++j) {
    for (int k = 1; k <= m_b; ++k) {
      const Eigen::Index col = static_cast<Eigen::Index>(j - 1) * m_b + (k - 1);
      b.index.push_back({j, k});
      b.frequencies.push_back({b.axes[0].frequency(j), b.axes[1].frequency(k)});
      for (Eigen::Index ia = 0; ia < na; ++ia) {
        for (Eigen::Index ib = 0; ib < nb; ++ib) b.phi(ia * nb + ib, col) = b.phi_a(ia, j - 1) * b.phi_b(ib, k - 1);
      }
    }
  }
  return b;
}

HsgpBasis build_hsgp_2d_symmetric(std::span<const double> grid_a, std::span<const double> grid_b, int m, double c) {
  auto [lo_a, hi_a] = range_of(grid_a);
  auto [lo_b, hi_b] = range_of(grid_b);
  HsgpBasis b;
  b.dim = 2;
  b.symmetric = true;
  b.axes[0] = make_axis(std::min(lo_a, lo_b), std::max(hi_a, hi_b), m, c);
  b.axes[1] = b.axes[0];
  b.phi_a = b.axes[0].evaluate(grid_a);
  b.phi_b = b.axes[1].evaluate(grid_b);
  for (int j = 1; j <= m; ++j) {
    for (int k = j; k <= m; ++k) {
      b.index.push_back({j, k});
      b.frequencies.push_back({b.axes[0].frequency(j), b.axes[0].frequency(k)});
    }
  }
  const Eigen::Index na = b.phi_a.rows(), nb = b.phi_b.rows();
  const auto M = static_cast<Eigen::Index>(b.index.size());
  b.phi.resize(na * nb, M);
  for (Eigen::Index col = 0; col < M; ++col) {
    const int j = b.index[col][0] - 1, k = b.index[col][1] - 1;
    for (Eigen::Index ia = 0; ia < na; ++ia) {
      for (Eigen::Index ib = 0; ib < nb; ++ib) {
        b.phi(ia * nb + ib, col) = sym_entry(b, col, b.phi_a(ia, j), b.phi_b(ib, k), b.phi_a(ia, k), b.phi_b(ib, j));
      }
    }
  }
  return b;
}

Eigen::MatrixXd HsgpBasis::evaluate(std::span<const double> x) const {
  if (dim != 1) throw ConfigError("1D evaluation on a 2D basis");
  return axes[0].evaluate(x);
}

Eigen::RowVectorXd HsgpBasis::evaluate(double a, double b) const {
  if (dim != 2) throw ConfigError("2D evaluation on a 1D basis");
  Eigen::RowVectorXd row(size());
  for (Eigen::Index col = 0; col < size(); ++col) {
    const int j = index[col][0], k = index[col][1];
    if (symmetric) {
      row[col] = sym_entry(*this, col, axes[0].eigenfunction(j, a), axes[1].eigenfunction(k, b),
                           axes[0].eigenfunction(k, a), axes[1].eigenfunction(j, b));
    } else {
      row[col] = axes[0].eigenfunction(j, a) * axes[1].eigenfunction(k, b);
    }
  }
  return row;
}

// --------------------------------------------------------------------------
// Spectral weights and realisations

SpectralWeights spectral_weights(const HsgpBasis& basis, KernelFamily family, double magnitude,
                                 std::span<const double> lengthscales) {
  if (static_cast<int>(lengthscales.size()) != basis.dim) throw ConfigError("one lengthscale per basis dimension");
  const Eigen::Index M = basis.size();
  SpectralWeights w;
  w.sqrt_density.resize(M);
  w.dlog_lengthscale[0] = Eigen::VectorXd::Zero(M);
  w.dlog_lengthscale[1] = Eigen::VectorXd::Zero(M);
  const std::size_t d = lengthscales.size();
  for (Eigen::Index col = 0; col < M; ++col) {
    const auto& fr = basis.frequencies[col];
    const double om[2] = {fr[0], fr[1]};
    const auto s1 = spectral_density_ard(family, magnitude, lengthscales, std::span<const double>(om, d));
    if (basis.symmetric && basis.index[col][0] != basis.index[col][1]) {
      const double om2[2] = {fr[1], fr[0]};
      const auto s2 = spectral_density_ard(family, magnitude, lengthscales, std::span<const double>(om2, d));
      const double total = s1.value + s2.value;
      w.sqrt_density[col] = std::sqrt(0.5 * total);
      for (std::size_t i = 0; i < d; ++i) {
        w.dlog_lengthscale[i][col] =
            total > 0.0 ? 0.5 * (s1.value * s1.dlog_lengthscale[i] + s2.value * s2.dlog_lengthscale[i]) / total
                        : 0.5 * (s1.dlog_lengthscale[i] + s2.dlog_lengthscale[i]) / 2.0;
      }
    } else {
      w.sqrt_density[col] = std::sqrt(s1.value);
      for (std::size_t i = 0; i < d; ++i) w.dlog_lengthscale[i][col] = 0.5 * s1.dlog_lengthscale[i];
    }
  }
  return w;
}

SpectralWeights spectral_weights(const HsgpBasis& basis, const KernelSpec& spec) {
  spec.validate();
  const double ls[2] = {spec.lengthscale, spec.lengthscale};
  return spectral_weights(basis, spec.family, spec.magnitude,
                          std::span<const double>(ls, static_cast<std::size_t>(basis.dim)));
}

Eigen::VectorXd realize(const HsgpBasis& basis, const SpectralWeights& weights, const Eigen::VectorXd& w) {
  if (w.size() != basis.size() || weights.sqrt_density.size() != basis.size()) {
    throw ConfigError("weight vector has " + std::to_string(w.size()) + " entries, basis has " +
                      std::to_string(basis.size()));
  }
  const Eigen::VectorXd beta = weights.sqrt_density.cwiseProduct(w);
  const Eigen::Index n = basis.phi.rows(), M = basis.phi.cols();
  Eigen::VectorXd f(n);
  // Plain loop: every row is reduced in the same order, which keeps the
  // symmetric 2D surface exactly symmetric.
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index col = 0; col < M; ++col) s += basis.phi(i, col) * beta[col];
    f[i] = s;
  }
  return f;
}

Eigen::VectorXd realize(const HsgpBasis& basis, const KernelSpec& spec, const Eigen::VectorXd& w) {
  return realize(basis, spectral_weights(basis, spec), w);
}

Eigen::MatrixXd hsgp_covariance(const HsgpBasis& basis, const KernelSpec& spec) {
  const auto sw = spectral_weights(basis, spec);
  const Eigen::MatrixXd scaled = basis.phi * sw.sqrt_density.asDiagonal();
  return scaled * scaled.transpose();
}

}  // namespace brc
