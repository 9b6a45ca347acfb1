#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brc/draws.hpp"
#include "brc/models.hpp"

namespace brc {

/// Mass matrix shape adapted during warmup.
enum class MetricKind { diagonal, dense };

struct SamplerConfig {
  int chains = 8;
  int warmup = 500;
  int sampling = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  /// Worker threads; 0 uses BRC_THREADS or the hardware concurrency.
  int threads = 0;
  /// Keep the draws x observations log-likelihood matrix (needed for LOO).
  bool store_pointwise = false;
  /// Initial values are uniform(-init_radius, init_radius) on the unconstrained scale.
  double init_radius = 2.0;
  MetricKind metric = MetricKind::diagonal;

  void validate() const;
};

/// Resolves SamplerConfig::threads (and the BRC_THREADS variable).
int resolve_threads(int requested);

struct Diagnostics {
  std::vector<std::string> names;
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess_bulk;
  int divergences = 0;

  /// NaN entries are ignored.
  double max_rhat() const;
  double min_ess() const;
};

struct SampleResult {
  PosteriorDraws draws;
  Diagnostics diagnostics;
};

/// Multinomial NUTS with dual-averaging step size and windowed diagonal
/// metric adaptation. Bit-reproducible for a given seed regardless of the
/// number of threads.
SampleResult sample(const Model& model, const SamplerConfig& cfg,
                    const std::optional<Eigen::VectorXd>& init = std::nullopt);

/// Same sampler on a bare density; outputs are the unconstrained coordinates.
SampleResult sample(const LogDensity& density, const SamplerConfig& cfg,
                    const std::optional<Eigen::VectorXd>& init = std::nullopt);

/// Split R-hat of an iterations x chains matrix. NaN for constant input.
double split_rhat(const Eigen::MatrixXd& draws);
/// Bulk ESS (split chains, Geyer initial monotone sequence).
double ess_bulk(const Eigen::MatrixXd& draws);

/// Per output column. Needs >= 2 chains and >= 4 iterations.
Diagnostics rhat_ess(const PosteriorDraws& draws);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::span<const double> values, double p);
Eigen::VectorXd quantiles(std::span<const double> values, std::span<const double> probs);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  std::vector<double> probs;
  std::vector<double> values;  ///< quantile at each prob
};

/// Default probs: 0.025, 0.25, 0.5, 0.75, 0.975.
std::vector<ParameterSummary> summarize(const PosteriorDraws& draws, std::span<const double> probs = {});

void write_summary_csv(std::ostream& out, const std::vector<ParameterSummary>& summary,
                       const Diagnostics* diagnostics = nullptr);

// --------------------------------------------------------------------------
// Optimisation

struct OptimizerConfig {
  int max_iterations = 5000;
  double grad_tolerance = 1e-6;
  int history = 10;
};

struct MapResult {
  Eigen::VectorXd theta;  ///< unconstrained
  double logp = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// L-BFGS ascent from `restarts` random starts (plus `init` when given);
/// returns the best converged optimum. Throws ConvergenceError with the final
/// gradient norm when no start converges.
MapResult map_fit(const LogDensity& density, int restarts, std::uint64_t seed,
                  const std::optional<Eigen::VectorXd>& init = std::nullopt, const OptimizerConfig& cfg = {});

}  // namespace brc
