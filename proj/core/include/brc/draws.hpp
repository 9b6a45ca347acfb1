#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <string>
#include <vector>

namespace brc {

/// Post-warmup draws, stored chain-major: row = chain * iterations + iteration.
struct PosteriorDraws {
  int chains = 0;
  int iterations = 0;

  std::vector<std::string> parameter_names;  ///< unconstrained coordinates
  Eigen::MatrixXd unconstrained;

  std::vector<std::string> output_names;  ///< constrained parameters and derived quantities
  Eigen::MatrixXd outputs;

  /// draws x observations; empty unless requested.
  Eigen::MatrixXd pointwise_loglik;
  Eigen::VectorXd log_density;

  std::vector<char> divergent;
  std::vector<int> tree_depth;
  std::vector<double> step_size;  ///< adapted step size per chain

  Eigen::Index draws() const { return unconstrained.rows(); }
  int divergences() const;

  /// Output column by name; throws std::out_of_range.
  Eigen::VectorXd output(const std::string& name) const;
  Eigen::Index output_index(const std::string& name) const;
  bool has_output(const std::string& name) const;

  /// iterations x chains view of one output column.
  Eigen::MatrixXd by_chain(Eigen::Index output_column) const;

  /// One row per draw: chain, iteration, then every output column.
  void write_csv(std::ostream& out) const;
};

}  // namespace brc
