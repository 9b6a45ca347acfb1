#include "model_internal.hpp"

#include "brc/error.hpp"

namespace brc::detail {

std::vector<PriorTerm> resolve_priors(const ParamLayout& layout, const std::map<std::string, PriorSpec>& defaults,
                                      const std::map<std::string, std::vector<PriorSpec>>& overrides) {
  for (const auto& [name, p] : overrides) {
    if (!defaults.count(name)) throw ConfigError("no prior override possible for block '" + name + "'");
  }
  std::vector<PriorTerm> out;
  for (const auto& [name, def] : defaults) {
    PriorTerm term;
    term.block = layout.index_of(name);
    const auto size = static_cast<std::size_t>(layout.block(term.block).size);
    auto it = overrides.find(name);
    if (it == overrides.end()) {
      term.specs.assign(size, def);
    } else if (it->second.size() == 1) {
      term.specs.assign(size, it->second.front());
    } else if (it->second.size() == size) {
      term.specs = it->second;
    } else {
      throw ConfigError("block '" + name + "' has " + std::to_string(size) + " elements but " +
                        std::to_string(it->second.size()) + " priors");
    }
    const bool positive = layout.block(term.block).transform == Transform::log;
    for (const auto& s : term.specs) {
      if (positive != s.positive_support()) {
        throw ConfigError("prior " + s.to_string() + " does not match the support of block '" + name + "'");
      }
    }
    out.push_back(std::move(term));
  }
  return out;
}

void add_priors(const std::vector<PriorTerm>& terms, ParamEval& pe) {
  for (const auto& term : terms) {
    const auto v = pe.value(term.block);
    auto g = pe.grad(term.block);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const auto r = log_prior(term.specs[static_cast<std::size_t>(k)], v[k]);
      pe.log_density += r.logp;
      g[k] += r.grad;
    }
  }
}

GpState gp_forward(const HsgpBasis& basis, const GpBlocks& b, const ParamEval& pe) {
  GpState s;
  s.w = pe.value(b.w);
  s.sigma = pe.scalar(b.sigma);
  s.lengthscale = pe.scalar(b.lengthscale);
  const double ls[1] = {s.lengthscale};
  s.weights = spectral_weights(basis, b.family, s.sigma, ls);
  s.values = basis.phi * s.weights.sqrt_density.cwiseProduct(s.w);
  return s;
}

Eigen::VectorXd gp_at(const HsgpBasis& basis, const GpState& s, std::span<const double> x) {
  return basis.evaluate(x) * s.weights.sqrt_density.cwiseProduct(s.w);
}

void gp_backward(const HsgpBasis& basis, const GpBlocks& b, const GpState& s, const Eigen::VectorXd& df,
                 ParamEval& pe) {
  const Eigen::VectorXd g = basis.phi.transpose() * df;
  const Eigen::VectorXd gsw = g.cwiseProduct(s.weights.sqrt_density).cwiseProduct(s.w);
  pe.grad(b.w) += g.cwiseProduct(s.weights.sqrt_density);
  pe.grad_scalar(b.sigma) += 0.5 * gsw.sum() / s.sigma;
  pe.grad_scalar(b.lengthscale) += gsw.dot(s.weights.dlog_lengthscale[0]) / s.lengthscale;
}

}  // namespace brc::detail
