#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace brc {

enum class KernelFamily { squared_exponential, matern32, matern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Stationary kernel. `magnitude` is the marginal variance, k(x, x) = magnitude.
struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double magnitude = 1.0;
  double lengthscale = 1.0;

  void validate() const;
};

double kernel_eval(const KernelSpec& spec, double x, double x_prime);

/// Isotropic kernel between points in R^d, d = x.size().
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x_prime);

/// Spectral density of the isotropic kernel in d = omega.size() dimensions (1 or 2).
double spectral_density(const KernelSpec& spec, std::span<const double> omega);

/// Spectral density with one lengthscale per input dimension, and its
/// log-derivatives. S(w) = magnitude * prod(l_i) * S_unit(|diag(l) w|).
struct SpectralValue {
  double value = 0.0;
  std::array<double, 2> dlog_lengthscale{0.0, 0.0};  ///< d log S / d log l_i
  // d log S / d log magnitude is identically 1.
};

SpectralValue spectral_density_ard(KernelFamily family, double magnitude, std::span<const double> lengthscales,
                                   std::span<const double> omega);

/// Laplacian eigenfunctions on [-L, L] for one input dimension.
struct HsgpAxis {
  double center = 0.0;
  double boundary = 1.0;  ///< L
  int m = 1;

  /// sqrt(lambda_j) = j pi / (2 L), j = 1..m
  double frequency(int j) const;
  /// phi_j(x) = L^{-1/2} sin(sqrt(lambda_j) (x - center + L))
  double eigenfunction(int j, double x) const;
  /// n x m table of eigenfunctions at `x`.
  Eigen::MatrixXd evaluate(std::span<const double> x) const;
};

/// Reduced-rank GP basis in one dimension or on a 2D tensor grid.
struct HsgpBasis {
  int dim = 1;
  bool symmetric = false;
  std::array<HsgpAxis, 2> axes;
  /// n x M eigenfunction matrix. In 2D rows run over (a, b) pairs with b fastest.
  Eigen::MatrixXd phi;
  /// Per column the 1-based eigen indices (j) or (j, k).
  std::vector<std::array<int, 2>> index;
  /// Per column the frequency vector (sqrt(lambda_j)[, sqrt(lambda_k)]).
  std::vector<std::array<double, 2>> frequencies;
  /// Per-axis eigenfunctions at the grid points (2D only; 1D uses phi).
  Eigen::MatrixXd phi_a;
  Eigen::MatrixXd phi_b;

  Eigen::Index size() const { return phi.cols(); }
  double boundary() const { return axes[0].boundary; }

  /// Eigenfunction rows for new 1D inputs.
  Eigen::MatrixXd evaluate(std::span<const double> x) const;
  /// Eigenfunction row for one 2D input (a, b).
  Eigen::RowVectorXd evaluate(double a, double b) const;
};

/// Inputs are centred at the midpoint of their range; L = c * max|centred input|.
HsgpBasis build_hsgp_1d(std::span<const double> inputs, int m, double c);

/// As above but the centre and half-width come from [domain_lo, domain_hi].
HsgpBasis build_hsgp_1d(std::span<const double> inputs, int m, double c, double domain_lo, double domain_hi);

/// Tensor-product basis with m_a x m_b columns on the grid grid_a x grid_b.
HsgpBasis build_hsgp_2d(std::span<const double> grid_a, std::span<const double> grid_b, int m_a, int m_b, double c);

/// Symmetrised tensor-product basis with m(m+1)/2 columns. Both axes share the
/// centre and boundary of the union of the two grids so that f(a, b) = f(b, a)
/// holds exactly for every weight vector.
HsgpBasis build_hsgp_2d_symmetric(std::span<const double> grid_a, std::span<const double> grid_b, int m, double c);

/// sqrt of the spectral density per basis column, with log-derivatives in
/// each lengthscale. Symmetric columns use the average of S(w_j, w_k) and
/// S(w_k, w_j).
struct SpectralWeights {
  Eigen::VectorXd sqrt_density;
  std::array<Eigen::VectorXd, 2> dlog_lengthscale;  ///< d log sqrt(S) / d log l_i
};

SpectralWeights spectral_weights(const HsgpBasis& basis, KernelFamily family, double magnitude,
                                 std::span<const double> lengthscales);
SpectralWeights spectral_weights(const HsgpBasis& basis, const KernelSpec& spec);

/// f = Phi (sqrt(S) .* w).
Eigen::VectorXd realize(const HsgpBasis& basis, const KernelSpec& spec, const Eigen::VectorXd& w);
Eigen::VectorXd realize(const HsgpBasis& basis, const SpectralWeights& weights, const Eigen::VectorXd& w);

/// Phi diag(S) Phi^T
Eigen::MatrixXd hsgp_covariance(const HsgpBasis& basis, const KernelSpec& spec);

}  // namespace brc
