#include "brc/models.hpp"

#include <cmath>

#include "brc/error.hpp"

namespace brc {

double HillCurve::asymptotic_percent_change() const { return 100.0 * (std::exp(-gamma) - 1.0); }

HillGradient hill_gradient(const HillCurve& curve, double r) {
  HillGradient g;
  if (!(r > 0.0)) return g;
  const double log_r = std::log(r);
  // s = e^zeta r^eta / (1 + e^zeta r^eta), evaluated without overflow.
  const double x = curve.zeta + curve.eta * log_r;
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  g.value = -curve.gamma * s;
  g.d_gamma = -s;
  g.d_zeta = -curve.gamma * s * (1.0 - s);
  g.d_eta = g.d_zeta * log_r;
  return g;
}

double hill(const HillCurve& curve, double r) { return hill_gradient(curve, r).value; }

namespace {

struct KindName {
  FatigueKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {FatigueKind::none, "none"},
    {FatigueKind::independent_effects, "independent"},
    {FatigueKind::identical_effect, "identical"},
    {FatigueKind::gp_on_repeats, "gp"},
    {FatigueKind::hill, "hill"},
    {FatigueKind::hill_per_covariate, "hill_per_covariate"},
    {FatigueKind::variant_a, "variant_a"},
    {FatigueKind::variant_b, "variant_b"},
    {FatigueKind::variant_c, "variant_c"},
};

}  // namespace

std::string to_string(FatigueKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "none";
}

FatigueKind fatigue_kind_from_string(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw ConfigError("unknown fatigue kind '" + name + "'");
}

double fatigue_variant_term(FatigueKind kind, int r, const FatigueLatents& latents) {
  if (r <= 0) return 0.0;
  switch (kind) {
    case FatigueKind::none: return 0.0;
    case FatigueKind::variant_a: return -std::exp(latents.rho + latents.f_age);
    case FatigueKind::variant_b: return -std::exp(latents.rho + latents.f_age + latents.f_mid);
    case FatigueKind::variant_c: return -std::exp(latents.rho + latents.f_joint);
    default: return latents.rho;
  }
}

}  // namespace brc
