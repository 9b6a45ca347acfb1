#pragma once

// Helpers shared by the model implementations.

#include <map>
#include <string>
#include <vector>

#include "brc/kernels.hpp"
#include "brc/params.hpp"
#include "brc/priors.hpp"

namespace brc::detail {

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct PriorTerm {
  std::size_t block = kNone;
  std::vector<PriorSpec> specs;
};

/// One prior per element of every block in `defaults`, with overrides keyed by
/// block name (one entry broadcasts). Throws ConfigError for unknown blocks,
/// size mismatches and priors whose support does not match the transform.
std::vector<PriorTerm> resolve_priors(const ParamLayout& layout, const std::map<std::string, PriorSpec>& defaults,
                                      const std::map<std::string, std::vector<PriorSpec>>& overrides);

void add_priors(const std::vector<PriorTerm>& terms, ParamEval& pe);

/// Scaled age coordinate on [-1, 1] for ages 0..84.
inline double rescale_age(double a) { return (a - 42.0) / 42.0; }

struct GpBlocks {
  std::size_t w = kNone;
  std::size_t sigma = kNone;
  std::size_t lengthscale = kNone;
  KernelFamily family = KernelFamily::squared_exponential;

  bool active() const { return w != kNone; }
};

struct GpState {
  SpectralWeights weights;
  Eigen::VectorXd w;
  double sigma = 1.0;
  double lengthscale = 1.0;
  Eigen::VectorXd values;
};

/// 1D GP on the basis grid.
GpState gp_forward(const HsgpBasis& basis, const GpBlocks& b, const ParamEval& pe);
Eigen::VectorXd gp_at(const HsgpBasis& basis, const GpState& s, std::span<const double> x);
/// Accumulates the gradient of a loss with d loss / d values = df.
void gp_backward(const HsgpBasis& basis, const GpBlocks& b, const GpState& s, const Eigen::VectorXd& df, ParamEval& pe);

}  // namespace brc::detail
