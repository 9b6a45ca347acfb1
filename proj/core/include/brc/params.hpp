#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace brc {

enum class Transform { identity, log };

struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  Transform transform = Transform::identity;
  bool scalar = false;  ///< named without an index
};

/// Named blocks of a flat unconstrained parameter vector.
class ParamLayout {
 public:
  /// Returns the block index used by ParamEval accessors.
  std::size_t add(std::string name, Eigen::Index size, Transform transform = Transform::identity);
  std::size_t add_scalar(std::string name, Transform transform = Transform::identity);

  Eigen::Index dim() const { return dim_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::size_t index) const { return blocks_[index]; }
  const ParamBlock& block(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  /// "beta[1]", "beta[2]", ... (1-based); scalar blocks keep the bare name.
  std::vector<std::string> scalar_names() const;

  Eigen::VectorXd constrain(const Eigen::VectorXd& unconstrained) const;
  Eigen::VectorXd unconstrain(const Eigen::VectorXd& constrained) const;

  /// Builds an unconstrained vector from constrained block values. Blocks not
  /// present in `values` are set to 0 on the unconstrained scale.
  Eigen::VectorXd pack(const std::map<std::string, Eigen::VectorXd>& values) const;
  std::map<std::string, Eigen::VectorXd> unpack(const Eigen::VectorXd& unconstrained) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::map<std::string, std::size_t> by_name_;
  Eigen::Index dim_ = 0;
};

/**
 * Scratch state for one log-density evaluation: constrained values and a
 * gradient accumulator with respect to them. finish() adds the log-transform
 * Jacobian and maps the gradient back to the unconstrained scale.
 */
class ParamEval {
 public:
  ParamEval(const ParamLayout& layout, const Eigen::VectorXd& unconstrained);

  Eigen::VectorXd::ConstSegmentReturnType value(std::size_t block) const {
    const auto& b = layout_.block(block);
    return constrained_.segment(b.offset, b.size);
  }
  double scalar(std::size_t block) const { return constrained_[layout_.block(block).offset]; }

  Eigen::VectorXd::SegmentReturnType grad(std::size_t block) {
    const auto& b = layout_.block(block);
    return grad_.segment(b.offset, b.size);
  }
  double& grad_scalar(std::size_t block) { return grad_[layout_.block(block).offset]; }

  double log_density = 0.0;

  /// Returns the total log density; writes the unconstrained gradient if `out` is set.
  double finish(Eigen::VectorXd* out) const;

 private:
  const ParamLayout& layout_;
  const Eigen::VectorXd& unconstrained_;
  Eigen::VectorXd constrained_;
  Eigen::VectorXd grad_;
};

}  // namespace brc
