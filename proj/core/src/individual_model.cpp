#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <boost/math/special_functions/digamma.hpp>

#include "brc/error.hpp"
#include "brc/models.hpp"
#include "model_internal.hpp"

namespace brc {

using detail::GpBlocks;
using detail::GpState;
using detail::kNone;
using detail::rescale_age;

struct IndividualModel::Impl {
  using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

  ModelFamily family = ModelFamily::individual_gam;
  Observation obs = Observation::nb2;
  FatigueKind fatigue = FatigueKind::none;

  // Collapsed rows.
  Eigen::Index groups = 0;
  Eigen::MatrixXd U, V, W;
  Eigen::VectorXd offset, count, total;
  std::vector<int> age, rep, wave_index;
  std::vector<Eigen::Index> row_group;
  std::vector<std::pair<int, double>> y_hist;
  double n_rows = 0.0;
  double sum_lgamma_y1 = 0.0;

  // Smooth components.
  HsgpBasis age_basis;
  Eigen::VectorXd age_weight;  // share of rows at each age; f is centred under it
  GpBlocks age_gp;
  HsgpBasis time_basis;
  GpBlocks time_gp;
  std::vector<int> waves;
  double wave_mean = 0.0, wave_sd = 1.0;
  HsgpBasis rep_basis;
  GpBlocks rep_gp;
  double rep_mean = 0.0, rep_sd = 1.0;
  int R = 0;  // repeats with their own effect (independent) or table size (gp)

  // Blocks.
  std::size_t beta0 = kNone;
  std::size_t alpha_z = kNone, alpha_sigma = kNone;  // stage 1, on U
  std::size_t beta_z = kNone, beta_sigma = kNone;    // longitudinal, on U
  std::size_t beta_u = kNone;                        // GAM, on U
  std::size_t beta_v = kNone;                        // stage-1 refit, on V
  std::size_t rhs_z = kNone, rhs_local = kNone, rhs_slab2 = kNone, rhs_global = kNone;
  bool rhs_on_w = false;
  RhsSpec rhs;
  std::size_t rho = kNone;
  std::size_t hill_gamma = kNone, hill_zeta = kNone, hill_eta = kNone;
  std::size_t phi = kNone;
  bool phi_default_prior = true;

  std::vector<detail::PriorTerm> priors;

  struct Components {
    double beta0 = 0.0;
    Eigen::VectorXd coef_u, coef_v, coef_w;
    GpState age, time, rep;
    double age_shift = 0.0;
    Eigen::VectorXd rho;
    std::vector<HillCurve> hills;
    double phi = 0.0;
    std::optional<RhsBlock> rhs;
  };

  Components forward(const ParamEval& pe) const;
  double fatigue_value(const Components& c, int r, const RowRef& w) const;
  /// hill value per (curve, repeat) for repeats 0..top.
  Eigen::MatrixXd hill_table(const Components& c, int top) const;
  double rep_gp_value(const Components& c, int r) const;
  Eigen::VectorXd group_eta(const Components& c) const;
  double log_posterior(const ParamLayout& layout, const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;
};

IndividualModel::IndividualModel(ModelSpec spec, IndividualData data) : Model(std::move(spec)), data_(std::move(data)) {
  spec_.validate();
  data_.validate();
  if (spec_.family == ModelFamily::aggregated_brc) throw ConfigError("aggregated_brc needs BRC data");
  auto impl = std::make_shared<Impl>();
  Impl& m = *impl;
  m.family = spec_.family;
  m.obs = spec_.observation;
  m.fatigue = spec_.fatigue.kind;
  const Eigen::Index n = data_.rows();
  const Eigen::Index pu = data_.baseline.cols(), pv = data_.tested.cols(), pw = data_.fatigue.cols();

  // Columns that matter for this family.
  const bool uses_v = m.family == ModelFamily::stage1_poisson;
  const bool uses_w = m.family == ModelFamily::stage2_poisson || m.fatigue == FatigueKind::hill_per_covariate;
  const bool uses_age = m.family == ModelFamily::individual_gam;
  const bool uses_rep = m.fatigue != FatigueKind::none || m.family == ModelFamily::stage2_poisson;

  // Distinct waves for the time GP.
  {
    std::vector<int> w(data_.wave.data(), data_.wave.data() + n);
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    m.waves = w;
  }
  const bool uses_time = m.family == ModelFamily::longitudinal_nb && spec_.time_gp.m > 0 && m.waves.size() > 1;

  // Group identical predictor rows.
  std::map<std::vector<double>, Eigen::Index> index;
  std::vector<Eigen::Index> rep_row;
  m.row_group.resize(static_cast<std::size_t>(n));
  std::vector<double> key;
  for (Eigen::Index i = 0; i < n; ++i) {
    key.clear();
    for (Eigen::Index j = 0; j < pu; ++j) key.push_back(data_.baseline(i, j));
    if (uses_v) {
      for (Eigen::Index j = 0; j < pv; ++j) key.push_back(data_.tested(i, j));
    }
    if (uses_w) {
      for (Eigen::Index j = 0; j < pw; ++j) key.push_back(data_.fatigue(i, j));
    }
    key.push_back(uses_age ? std::round(data_.age[i]) : 0.0);
    key.push_back(uses_rep ? data_.repeat[i] : 0.0);
    key.push_back(uses_time ? data_.wave[i] : 0.0);
    key.push_back(data_.offset[i]);
    auto [it, inserted] = index.emplace(key, static_cast<Eigen::Index>(rep_row.size()));
    if (inserted) rep_row.push_back(i);
    m.row_group[static_cast<std::size_t>(i)] = it->second;
  }
  m.groups = static_cast<Eigen::Index>(rep_row.size());
  const Eigen::Index G = m.groups;
  m.U.resize(G, pu);
  m.V.resize(G, uses_v ? pv : 0);
  m.W.resize(G, pw);
  m.offset.resize(G);
  m.count = Eigen::VectorXd::Zero(G);
  m.total = Eigen::VectorXd::Zero(G);
  m.age.resize(G);
  m.rep.resize(G);
  m.wave_index.resize(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const Eigen::Index i = rep_row[g];
    m.U.row(g) = data_.baseline.row(i);
    if (uses_v) m.V.row(g) = data_.tested.row(i);
    m.W.row(g) = data_.fatigue.row(i);
    m.offset[g] = data_.offset[i];
    m.age[g] = static_cast<int>(std::round(data_.age[i]));
    m.rep[g] = data_.repeat[i];
    m.wave_index[g] = static_cast<int>(std::lower_bound(m.waves.begin(), m.waves.end(), data_.wave[i]) - m.waves.begin());
  }
  std::map<int, double> hist;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = m.row_group[static_cast<std::size_t>(i)];
    m.count[g] += 1.0;
    m.total[g] += data_.y[i];
    hist[data_.y[i]] += 1.0;
    m.sum_lgamma_y1 += std::lgamma(data_.y[i] + 1.0);
  }
  m.y_hist.assign(hist.begin(), hist.end());
  m.n_rows = static_cast<double>(n);

  // Repeat scaling.
  int max_r = 0;
  if (n > 0) {
    max_r = data_.repeat.maxCoeff();
    const double mean = data_.repeat.cast<double>().mean();
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) var += (data_.repeat[i] - mean) * (data_.repeat[i] - mean);
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    repeat_mean_ = mean;
    repeat_sd_ = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  m.rep_mean = repeat_mean_;
  m.rep_sd = repeat_sd_;

  // Parameter layout and default priors.
  std::map<std::string, PriorSpec> defaults;
  auto scalar = [&](const char* name, Transform t, PriorSpec p) {
    const auto b = layout_.add_scalar(name, t);
    defaults[name] = p;
    return b;
  };
  auto vec = [&](const char* name, Eigen::Index size, Transform t, PriorSpec p) {
    const auto b = layout_.add(name, size, t);
    defaults[name] = p;
    return b;
  };
  const auto std_normal = PriorSpec::normal(0.0, 1.0);
  auto add_rhs = [&](Eigen::Index K, RhsSign sign) {
    m.rhs = spec_.rhs;
    m.rhs.K = static_cast<int>(K);
    m.rhs.n = static_cast<int>(std::max<Eigen::Index>(n, 1));
    if (!(m.rhs.p0 > 0.0)) m.rhs.p0 = 0.5 * K;
    m.rhs.sign = sign;
    m.rhs.validate();
    // Prior lives in RhsBlock; the negative variant keeps z >= 0 so the sign stays identified.
    m.rhs_z = layout_.add("rhs_z", K, sign == RhsSign::negative ? Transform::log : Transform::identity);
    m.rhs_local = layout_.add("rhs_local", K, Transform::log);
    m.rhs_slab2 = layout_.add_scalar("rhs_slab2", Transform::log);
    m.rhs_global = layout_.add_scalar("rhs_global", Transform::log);
  };

  switch (m.family) {
    case ModelFamily::stage1_poisson:
      m.beta0 = scalar("beta0", Transform::identity, PriorSpec::normal(0.0, 100.0));
      if (pu > 0) {
        m.alpha_z = vec("alpha_z", pu, Transform::identity, std_normal);
        m.alpha_sigma = scalar("alpha_sigma", Transform::log, PriorSpec::cauchy_pos(0.0, 1.0));
      }
      if (pv > 0) {
        if (spec_.tested_rhs) {
          add_rhs(pv, RhsSign::unconstrained);
        } else {
          m.beta_v = vec("beta", pv, Transform::identity, std_normal);
        }
      }
      break;
    case ModelFamily::stage2_poisson:
      if (pw < 1) throw ConfigError("stage-2 model needs at least one fatigue candidate");
      add_rhs(pw, RhsSign::negative);
      m.rhs_on_w = true;
      break;
    case ModelFamily::longitudinal_nb:
      m.beta0 = scalar("beta0", Transform::identity, PriorSpec::normal(0.0, 10.0));
      if (pu > 0) {
        m.beta_z = vec("beta_z", pu, Transform::identity, std_normal);
        m.beta_sigma = scalar("beta_sigma", Transform::log, PriorSpec::cauchy_pos(0.0, 1.0));
      }
      if (uses_time) {
        std::vector<double> t(m.waves.begin(), m.waves.end());
        double mean = 0.0;
        for (double v : t) mean += v;
        mean /= static_cast<double>(t.size());
        double var = 0.0;
        for (double v : t) var += (v - mean) * (v - mean);
        m.wave_mean = mean;
        m.wave_sd = std::sqrt(var / static_cast<double>(t.size() - 1));
        for (double& v : t) v = (v - m.wave_mean) / m.wave_sd;
        m.time_basis = build_hsgp_1d(t, spec_.time_gp.m, spec_.time_gp.c);
        m.time_gp.family = KernelFamily::matern32;
        m.time_gp.w = vec("tau_w", spec_.time_gp.m, Transform::identity, std_normal);
        m.time_gp.sigma = scalar("tau_sigma", Transform::log, PriorSpec::inv_gamma(5.0, 1.0));
        m.time_gp.lengthscale = scalar("tau_lengthscale", Transform::log, PriorSpec::inv_gamma(5.0, 1.0));
      }
      break;
    case ModelFamily::individual_gam: {
      m.beta0 = scalar("beta0", Transform::identity, PriorSpec::normal(0.0, 10.0));
      if (pu > 0) m.beta_u = vec("beta", pu, Transform::identity, std_normal);
      std::vector<double> grid(kAgeCount);
      for (int a = 0; a < kAgeCount; ++a) grid[a] = rescale_age(a);
      m.age_basis = build_hsgp_1d(grid, spec_.age_gp.m, spec_.age_gp.c, -1.0, 1.0);
      m.age_weight = Eigen::VectorXd::Zero(kAgeCount);
      for (Eigen::Index i = 0; i < n; ++i) {
        m.age_weight[std::clamp(static_cast<int>(std::lround(data_.age[i])), 0, kMaxAge)] += 1.0;
      }
      if (n > 0) m.age_weight /= static_cast<double>(n);
      m.age_gp.family = KernelFamily::squared_exponential;
      m.age_gp.w = vec("age_w", spec_.age_gp.m, Transform::identity, std_normal);
      m.age_gp.sigma = scalar("age_sigma", Transform::log, PriorSpec::cauchy_pos(0.0, 1.0));
      m.age_gp.lengthscale = scalar("age_lengthscale", Transform::log, PriorSpec::inv_gamma(5.0, 5.0));
      break;
    }
    case ModelFamily::aggregated_brc: break;
  }

  switch (m.fatigue) {
    case FatigueKind::independent_effects:
      m.R = spec_.fatigue.max_repeat > 0 ? spec_.fatigue.max_repeat : std::max(max_r, 1);
      m.rho = vec("rho", m.R, Transform::identity, std_normal);
      break;
    case FatigueKind::identical_effect:
      m.rho = scalar("rho", Transform::identity, std_normal);
      break;
    case FatigueKind::gp_on_repeats: {
      m.R = std::max({max_r, spec_.fatigue.max_repeat, 1});
      std::vector<double> z(static_cast<std::size_t>(m.R) + 1);
      for (int r = 0; r <= m.R; ++r) z[r] = (r - m.rep_mean) / m.rep_sd;
      std::vector<double> observed;
      for (Eigen::Index i = 0; i < n; ++i) observed.push_back((data_.repeat[i] - m.rep_mean) / m.rep_sd);
      observed.push_back(z.front());
      observed.push_back(z.back());
      auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
      m.rep_basis = build_hsgp_1d(z, spec_.repeat_gp.m, spec_.repeat_gp.c, *lo, *hi);
      m.rep_gp.family = KernelFamily::squared_exponential;
      m.rep_gp.w = vec("rho_w", spec_.repeat_gp.m, Transform::identity, std_normal);
      m.rep_gp.sigma = scalar("rho_sigma", Transform::log, PriorSpec::inv_gamma(5.0, 1.0));
      m.rep_gp.lengthscale = scalar("rho_lengthscale", Transform::log, PriorSpec::inv_gamma(5.0, 1.0));
      break;
    }
    case FatigueKind::hill:
    case FatigueKind::hill_per_covariate: {
      const Eigen::Index Q = m.fatigue == FatigueKind::hill ? 1 : pw;
      if (Q < 1) throw ConfigError("per-covariate Hill fatigue needs fatigue columns");
      m.hill_gamma = vec("hill_gamma", Q, Transform::log, PriorSpec::half_normal_pos(0.0, 1.0));
      m.hill_zeta = vec("hill_zeta", Q, Transform::identity, std_normal);
      m.hill_eta = vec("hill_eta", Q, Transform::log, PriorSpec::exponential(1.0));
      break;
    }
    default: break;
  }

  if (m.obs == Observation::nb2) {
    m.phi = layout_.add_scalar("phi", Transform::log);
    m.phi_default_prior = !spec_.priors.count("phi");
    if (!m.phi_default_prior) defaults["phi"] = PriorSpec::exponential(1.0);
  }

  m.priors = detail::resolve_priors(layout_, defaults, spec_.priors);
  impl_ = std::move(impl);
}

IndividualModel::Impl::Components IndividualModel::Impl::forward(const ParamEval& pe) const {
  Components c;
  const Eigen::Index pu = U.cols();
  if (beta0 != kNone) c.beta0 = pe.scalar(beta0);
  c.coef_u = Eigen::VectorXd::Zero(pu);
  if (alpha_z != kNone) c.coef_u = pe.scalar(alpha_sigma) * pe.value(alpha_z);
  if (beta_z != kNone) c.coef_u = pe.scalar(beta_sigma) * pe.value(beta_z);
  if (beta_u != kNone) c.coef_u = pe.value(beta_u);
  c.coef_v = Eigen::VectorXd::Zero(V.cols());
  if (beta_v != kNone) c.coef_v = pe.value(beta_v);
  c.coef_w = Eigen::VectorXd::Zero(0);
  if (rhs_z != kNone) {
    c.rhs.emplace(rhs, pe.value(rhs_z), pe.value(rhs_local), pe.scalar(rhs_slab2), pe.scalar(rhs_global));
    if (rhs_on_w) {
      c.coef_w = c.rhs->coefficients();
    } else {
      c.coef_v = c.rhs->coefficients();
    }
  }
  if (age_gp.active()) {
    c.age = detail::gp_forward(age_basis, age_gp, pe);
    c.age_shift = age_weight.dot(c.age.values);
    c.age.values.array() -= c.age_shift;
  }
  if (time_gp.active()) c.time = detail::gp_forward(time_basis, time_gp, pe);
  if (rep_gp.active()) c.rep = detail::gp_forward(rep_basis, rep_gp, pe);
  if (rho != kNone) c.rho = pe.value(rho);
  if (hill_gamma != kNone) {
    const auto g = pe.value(hill_gamma), z = pe.value(hill_zeta), e = pe.value(hill_eta);
    for (Eigen::Index q = 0; q < g.size(); ++q) c.hills.push_back({g[q], z[q], e[q]});
  }
  if (phi != kNone) c.phi = pe.scalar(phi);
  return c;
}

double IndividualModel::Impl::rep_gp_value(const Components& c, int r) const {
  if (r <= R) return c.rep.values[r] - c.rep.values[0];
  const double z = (r - rep_mean) / rep_sd;
  return detail::gp_at(rep_basis, c.rep, std::span<const double>(&z, 1))[0] - c.rep.values[0];
}

Eigen::MatrixXd IndividualModel::Impl::hill_table(const Components& c, int top) const {
  Eigen::MatrixXd tab(static_cast<Eigen::Index>(c.hills.size()), top + 1);
  for (std::size_t q = 0; q < c.hills.size(); ++q) {
    for (int r = 0; r <= top; ++r) tab(static_cast<Eigen::Index>(q), r) = hill(c.hills[q], r);
  }
  return tab;
}

double IndividualModel::Impl::fatigue_value(const Components& c, int r, const RowRef& w) const {
  if (r <= 0) return 0.0;
  switch (fatigue) {
    case FatigueKind::independent_effects: return c.rho[std::min(r, R) - 1];
    case FatigueKind::identical_effect: return c.rho[0];
    case FatigueKind::gp_on_repeats: return rep_gp_value(c, r);
    case FatigueKind::hill: return hill(c.hills[0], r);
    case FatigueKind::hill_per_covariate: {
      double s = 0.0;
      for (std::size_t q = 0; q < c.hills.size(); ++q) {
        if (w[static_cast<Eigen::Index>(q)] != 0.0) s += w[static_cast<Eigen::Index>(q)] * hill(c.hills[q], r);
      }
      return s;
    }
    default: return 0.0;
  }
}

Eigen::VectorXd IndividualModel::Impl::group_eta(const Components& c) const {
  Eigen::VectorXd eta = offset.array() + c.beta0;
  if (U.cols() > 0) eta.noalias() += U * c.coef_u;
  if (V.cols() > 0 && c.coef_v.size() > 0) eta.noalias() += V * c.coef_v;
  if (c.coef_w.size() > 0) eta.noalias() += W * c.coef_w;
  if (age_gp.active()) {
    for (Eigen::Index g = 0; g < groups; ++g) eta[g] += c.age.values[age[g]];
  }
  if (time_gp.active()) {
    for (Eigen::Index g = 0; g < groups; ++g) eta[g] += c.time.values[wave_index[g]];
  }
  if (fatigue == FatigueKind::hill || fatigue == FatigueKind::hill_per_covariate) {
    const int top = groups > 0 ? *std::max_element(rep.begin(), rep.end()) : 0;
    const Eigen::MatrixXd tab = hill_table(c, top);
    for (Eigen::Index g = 0; g < groups; ++g) {
      if (rep[g] <= 0) continue;
      if (fatigue == FatigueKind::hill) {
        eta[g] += tab(0, rep[g]);
      } else {
        for (Eigen::Index q = 0; q < tab.rows(); ++q) eta[g] += W(g, q) * tab(q, rep[g]);
      }
    }
  } else if (fatigue != FatigueKind::none) {
    for (Eigen::Index g = 0; g < groups; ++g) eta[g] += fatigue_value(c, rep[g], W.row(g));
  }
  for (Eigen::Index g = 0; g < groups; ++g) {
    if (!std::isfinite(eta[g])) throw NonFiniteError("non-finite linear predictor", static_cast<std::size_t>(g));
  }
  return eta;
}

double IndividualModel::Impl::log_posterior(const ParamLayout& layout, const Eigen::VectorXd& theta,
                                            Eigen::VectorXd* grad) const {
  if (theta.size() != layout.dim()) throw ConfigError("parameter vector has wrong length");
  ParamEval pe(layout, theta);
  const Components c = forward(pe);
  const Eigen::VectorXd eta = group_eta(c);

  // Likelihood over collapsed rows.
  Eigen::VectorXd d_eta(groups);
  double ll = -sum_lgamma_y1;
  if (obs == Observation::poisson) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const double mu = std::exp(eta[g]);
      ll += total[g] * eta[g] - count[g] * mu;
      d_eta[g] = total[g] - count[g] * mu;
    }
  } else {
    using boost::math::digamma;
    const double ph = c.phi;
    if (!(ph > 0.0) || !std::isfinite(ph)) throw NonFiniteError("dispersion out of range", 0);
    const double log_phi = std::log(ph);
    double d_phi = 0.0;
    for (const auto& [y, h] : y_hist) {
      if (y == 0) continue;
      ll += h * (std::lgamma(y + ph) - std::lgamma(ph));
      if (grad) d_phi += h * (digamma(y + ph) - digamma(ph));
    }
    ll += n_rows * ph * log_phi;
    d_phi += n_rows * (log_phi + 1.0);
    // x = log(mu / phi); lpm = log(phi + mu), share = mu / (phi + mu).
    const Eigen::ArrayXd x = eta.array() - log_phi;
    const Eigen::ArrayXd t = (-x.abs()).exp();
    const Eigen::ArrayXd lpm = log_phi + x.max(0.0) + t.log1p();
    const Eigen::ArrayXd share = (x >= 0.0).select(1.0 / (1.0 + t), t / (1.0 + t));
    const Eigen::ArrayXd a = count.array() * ph + total.array();
    ll += (total.array() * eta.array() - a * lpm).sum();
    d_eta = total.array() - a * share;
    d_phi -= (count.array() * lpm + a * (1.0 - share) / ph).sum();
    if (grad) pe.grad_scalar(phi) += d_phi;
  }
  pe.log_density += ll;

  detail::add_priors(priors, pe);
  if (phi != kNone && phi_default_prior) {
    // 1/phi ~ Exponential(1): p(phi) = exp(-1/phi) / phi^2
    pe.log_density += -1.0 / c.phi - 2.0 * std::log(c.phi);
    pe.grad_scalar(phi) += 1.0 / (c.phi * c.phi) - 2.0 / c.phi;
  }
  if (c.rhs) pe.log_density += c.rhs->log_prior();

  if (!grad) return pe.finish(nullptr);

  // Back-propagate d_eta.
  if (beta0 != kNone) pe.grad_scalar(beta0) += d_eta.sum();
  if (U.cols() > 0) {
    const Eigen::VectorXd d_u = U.transpose() * d_eta;
    if (alpha_z != kNone) {
      const double s = pe.scalar(alpha_sigma);
      pe.grad(alpha_z) += s * d_u;
      pe.grad_scalar(alpha_sigma) += d_u.dot(pe.value(alpha_z));
    }
    if (beta_z != kNone) {
      const double s = pe.scalar(beta_sigma);
      pe.grad(beta_z) += s * d_u;
      pe.grad_scalar(beta_sigma) += d_u.dot(pe.value(beta_z));
    }
    if (beta_u != kNone) pe.grad(beta_u) += d_u;
  }
  Eigen::VectorXd d_v = V.cols() > 0 ? Eigen::VectorXd(V.transpose() * d_eta) : Eigen::VectorXd();
  if (beta_v != kNone) pe.grad(beta_v) += d_v;
  if (c.rhs) {
    const Eigen::VectorXd d_coef = rhs_on_w ? Eigen::VectorXd(W.transpose() * d_eta) : d_v;
    const auto rg = c.rhs->gradient(d_coef);
    pe.grad(rhs_z) += rg.d_z;
    pe.grad(rhs_local) += rg.d_local;
    pe.grad_scalar(rhs_slab2) += rg.d_slab2;
    pe.grad_scalar(rhs_global) += rg.d_global;
  }
  if (age_gp.active()) {
    Eigen::VectorXd df = Eigen::VectorXd::Zero(kAgeCount);
    for (Eigen::Index g = 0; g < groups; ++g) df[age[g]] += d_eta[g];
    df -= age_weight * df.sum();
    detail::gp_backward(age_basis, age_gp, c.age, df, pe);
  }
  if (time_gp.active()) {
    Eigen::VectorXd df = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(waves.size()));
    for (Eigen::Index g = 0; g < groups; ++g) df[wave_index[g]] += d_eta[g];
    detail::gp_backward(time_basis, time_gp, c.time, df, pe);
  }
  switch (fatigue) {
    case FatigueKind::independent_effects: {
      auto gr = pe.grad(rho);
      for (Eigen::Index g = 0; g < groups; ++g) {
        if (rep[g] > 0) gr[std::min(rep[g], R) - 1] += d_eta[g];
      }
      break;
    }
    case FatigueKind::identical_effect:
      for (Eigen::Index g = 0; g < groups; ++g) {
        if (rep[g] > 0) pe.grad_scalar(rho) += d_eta[g];
      }
      break;
    case FatigueKind::gp_on_repeats: {
      Eigen::VectorXd df = Eigen::VectorXd::Zero(R + 1);
      for (Eigen::Index g = 0; g < groups; ++g) {
        if (rep[g] > 0) {
          df[rep[g]] += d_eta[g];
          df[0] -= d_eta[g];
        }
      }
      detail::gp_backward(rep_basis, rep_gp, c.rep, df, pe);
      break;
    }
    case FatigueKind::hill:
    case FatigueKind::hill_per_covariate: {
      auto dg = pe.grad(hill_gamma);
      auto dz = pe.grad(hill_zeta);
      auto de = pe.grad(hill_eta);
      const bool per_cov = fatigue == FatigueKind::hill_per_covariate;
      const int top = groups > 0 ? *std::max_element(rep.begin(), rep.end()) : 0;
      std::vector<HillGradient> tab;
      for (const auto& h : c.hills) {
        for (int r = 0; r <= top; ++r) tab.push_back(hill_gradient(h, r));
      }
      for (Eigen::Index g = 0; g < groups; ++g) {
        if (rep[g] <= 0) continue;
        for (std::size_t q = 0; q < c.hills.size(); ++q) {
          const double wq = per_cov ? W(g, static_cast<Eigen::Index>(q)) : 1.0;
          if (wq == 0.0) continue;
          const auto& hg = tab[q * static_cast<std::size_t>(top + 1) + static_cast<std::size_t>(rep[g])];
          const double s = d_eta[g] * wq;
          const auto qi = static_cast<Eigen::Index>(q);
          dg[qi] += s * hg.d_gamma;
          dz[qi] += s * hg.d_zeta;
          de[qi] += s * hg.d_eta;
        }
      }
      break;
    }
    default: break;
  }
  return pe.finish(grad);
}

double IndividualModel::log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  return impl_->log_posterior(layout_, theta, grad);
}

Eigen::VectorXd IndividualModel::pointwise_loglik(const Eigen::VectorXd& theta) const {
  ParamEval pe(layout_, theta);
  const auto c = impl_->forward(pe);
  const Eigen::VectorXd eta = impl_->group_eta(c);
  const Eigen::Index n = data_.rows();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::exp(eta[impl_->row_group[static_cast<std::size_t>(i)]]);
    out[i] = nb_logpmf(data_.y[i], mu, c.phi, impl_->obs).logp;
  }
  return out;
}

std::vector<std::string> IndividualModel::output_names() const {
  auto names = layout_.scalar_names();
  const auto& m = *impl_;
  auto indexed = [&](const std::string& base, Eigen::Index size) {
    for (Eigen::Index k = 0; k < size; ++k) names.push_back(base + "[" + std::to_string(k + 1) + "]");
  };
  if (m.alpha_z != kNone) indexed("alpha", m.U.cols());
  if (m.beta_z != kNone) indexed("beta", m.U.cols());
  if (m.rhs_z != kNone) indexed(m.rhs_on_w ? "gamma" : "beta", m.rhs.K);
  if (m.family == ModelFamily::longitudinal_nb && m.fatigue != FatigueKind::none) {
    indexed("fatigue", std::max(m.R, data_.rows() > 0 ? data_.repeat.maxCoeff() : 0));
  }
  return names;
}

Eigen::VectorXd IndividualModel::outputs(const Eigen::VectorXd& theta) const {
  ParamEval pe(layout_, theta);
  const auto& m = *impl_;
  const auto c = m.forward(pe);
  std::vector<double> extra;
  if (m.alpha_z != kNone || m.beta_z != kNone) extra.insert(extra.end(), c.coef_u.data(), c.coef_u.data() + c.coef_u.size());
  if (m.rhs_z != kNone) {
    const auto& coef = c.rhs->coefficients();
    extra.insert(extra.end(), coef.data(), coef.data() + coef.size());
  }
  if (m.family == ModelFamily::longitudinal_nb && m.fatigue != FatigueKind::none) {
    const int top = std::max(m.R, data_.rows() > 0 ? data_.repeat.maxCoeff() : 0);
    const Eigen::RowVectorXd w = Eigen::RowVectorXd::Ones(m.W.cols());
    for (int r = 1; r <= top; ++r) extra.push_back(m.fatigue_value(c, r, w));
  }
  const Eigen::VectorXd base = layout_.constrain(theta);
  Eigen::VectorXd out(base.size() + static_cast<Eigen::Index>(extra.size()));
  out << base, Eigen::Map<const Eigen::VectorXd>(extra.data(), static_cast<Eigen::Index>(extra.size()));
  return out;
}

Eigen::VectorXd IndividualModel::predict_log_intensity(const Eigen::VectorXd& theta, const IndividualData& newdata,
                                                       bool debias) const {
  newdata.validate();
  const auto& m = *impl_;
  if (newdata.baseline.cols() != m.U.cols() || (m.V.cols() > 0 && newdata.tested.cols() != m.V.cols()) ||
      newdata.fatigue.cols() != m.W.cols()) {
    throw DataError("new data columns do not match the fitted model");
  }
  ParamEval pe(layout_, theta);
  const auto c = m.forward(pe);
  const Eigen::Index n = newdata.rows();
  Eigen::VectorXd eta = newdata.offset.array() + c.beta0;
  if (m.U.cols() > 0) eta.noalias() += newdata.baseline * c.coef_u;
  if (m.V.cols() > 0 && c.coef_v.size() > 0) eta.noalias() += newdata.tested * c.coef_v;
  if (!debias && c.coef_w.size() > 0) eta.noalias() += newdata.fatigue * c.coef_w;
  if (m.age_gp.active()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = static_cast<int>(std::round(newdata.age[i]));
      eta[i] += c.age.values[a];
    }
  }
  if (m.time_gp.active()) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) t[i] = (newdata.wave[i] - m.wave_mean) / m.wave_sd;
    eta += detail::gp_at(m.time_basis, c.time, t);
  }
  if (!debias && m.fatigue != FatigueKind::none) {
    for (Eigen::Index i = 0; i < n; ++i) eta[i] += m.fatigue_value(c, newdata.repeat[i], newdata.fatigue.row(i));
  }
  return eta;
}

double IndividualModel::fatigue_effect(const Eigen::VectorXd& theta, Eigen::Index q, int r) const {
  const auto& m = *impl_;
  ParamEval pe(layout_, theta);
  const auto c = m.forward(pe);
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(m.W.cols());
  if (m.W.cols() > 0) w[std::clamp<Eigen::Index>(q, 0, m.W.cols() - 1)] = 1.0;
  if (c.coef_w.size() > 0) return w.dot(c.coef_w) * (r > 0 ? 1.0 : 0.0);
  return m.fatigue_value(c, r, w);
}

Eigen::VectorXd IndividualModel::age_effect(const Eigen::VectorXd& theta, std::span<const double> ages) const {
  const auto& m = *impl_;
  if (!m.age_gp.active()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ages.size()));
  ParamEval pe(layout_, theta);
  const auto c = m.forward(pe);
  std::vector<double> x(ages.begin(), ages.end());
  for (double& v : x) v = rescale_age(v);
  return detail::gp_at(m.age_basis, c.age, x).array() - c.age_shift;
}

}  // namespace brc
