#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace brc {

/// Mean of |est - base| / base, in percent. Throws DataError for a
/// non-positive baseline point or a length mismatch.
double mape(std::span<const double> estimate, std::span<const double> baseline);

/// Fraction of baseline points inside [lower, upper].
double interval_coverage(std::span<const double> baseline, std::span<const double> lower,
                         std::span<const double> upper);

struct PpcSummary {
  /// Per cell: share of replicate draws >= the observed count.
  Eigen::VectorXd tail_probability;
  int flagged = 0;
  double flagged_fraction = 0.0;
};

struct MseAndPpc {
  double mse = 0.0;
  PpcSummary ppc;
};

/// `predictions` and `replicates` are draws x cells.
MseAndPpc mse_and_ppc(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& replicates,
                      std::span<const double> observed, double lower = 0.025, double upper = 0.975);

struct GpdFit {
  double k = 0.0;      ///< shape
  double sigma = 1.0;  ///< scale
};

/// Zhang-Stephens estimate for exceedances (any order, all >= 0).
GpdFit fit_generalized_pareto(std::span<const double> exceedances);

struct LooResult {
  double elpd = 0.0;
  double elpd_se = 0.0;
  Eigen::VectorXd pointwise;
  Eigen::VectorXd pareto_k;

  /// Observations with k > 0.7.
  std::vector<Eigen::Index> flagged(double threshold = 0.7) const;
};

/// PSIS-LOO from a draws x observations log-likelihood matrix (>= 100 draws).
LooResult psis_loo(const Eigen::MatrixXd& loglik);

struct LooComparison {
  std::string model;
  double elpd = 0.0;
  double se = 0.0;
  double delta = 0.0;  ///< elpd - best elpd (<= 0)
};

/// Sorted best first.
std::vector<LooComparison> loo_compare(const std::vector<std::pair<std::string, LooResult>>& fits);

void write_loo_table(std::ostream& out, const std::vector<LooComparison>& rows);

}  // namespace brc
