#include <algorithm>
#include <cmath>
#include <map>

#include "brc/error.hpp"
#include "brc/models.hpp"
#include "model_internal.hpp"

namespace brc {

using detail::kNone;

namespace {

constexpr int kPairs = 3;  // MM, FF (symmetric) and MF (full)

// Surface index q = 2 g + h: 0 MM, 1 MF, 2 FM, 3 FF.
constexpr int kSurfaces = 4;

struct CellInfo {
  int t = 0, r = 0, a = 0, g = 0, band = 0, y = 0;
  int h_lo = 0, h_hi = 1;  // contact genders summed over, inclusive
  double scale = 1.0;      // N S
};

// Unpacks column weights of a 2D basis into an m x m coefficient matrix.
Eigen::MatrixXd coefficient_matrix(const HsgpBasis& basis, const Eigen::VectorXd& coef, int m) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index col = 0; col < coef.size(); ++col) {
    const int j = basis.index[col][0] - 1, k = basis.index[col][1] - 1;
    if (basis.symmetric && j != k) {
      B(j, k) = coef[col] / std::sqrt(2.0);
      B(k, j) = B(j, k);
    } else {
      B(j, k) = coef[col];
    }
  }
  return B;
}

// Adjoint of coefficient_matrix.
Eigen::VectorXd fold_coefficients(const HsgpBasis& basis, const Eigen::MatrixXd& dB) {
  Eigen::VectorXd out(basis.size());
  for (Eigen::Index col = 0; col < out.size(); ++col) {
    const int j = basis.index[col][0] - 1, k = basis.index[col][1] - 1;
    out[col] = basis.symmetric && j != k ? (dB(j, k) + dB(k, j)) / std::sqrt(2.0) : dB(j, k);
  }
  return out;
}

// Gradient of weights w, magnitude and lengthscales given d/dcoef with coef = sqrt(S) .* w.
struct WeightGrad {
  Eigen::VectorXd d_w;
  double d_sigma = 0.0;
  double d_ls[2] = {0.0, 0.0};
};

WeightGrad weight_grad(const SpectralWeights& sw, const Eigen::VectorXd& w, double sigma, const double* ls,
                       int dims, const Eigen::VectorXd& d_coef) {
  WeightGrad out;
  out.d_w = d_coef.cwiseProduct(sw.sqrt_density);
  const Eigen::VectorXd gsw = out.d_w.cwiseProduct(w);
  out.d_sigma = 0.5 * gsw.sum() / sigma;
  for (int i = 0; i < dims; ++i) out.d_ls[i] = gsw.dot(sw.dlog_lengthscale[i]) / ls[i];
  return out;
}

}  // namespace

struct BrcModel::Impl {
  int T = 1, A = 1, C = 1, R = 0, Rmax = 0;
  FatigueKind fatigue = FatigueKind::none;
  bool pin_first_wave = true;
  int m_surface = 1, m_fatigue = 1;

  Eigen::MatrixXd log_pop;  // 2 x A
  std::vector<int> band_of_age;
  std::vector<std::pair<int, int>> band_range;  // first age, width
  std::vector<CellInfo> cells;

  HsgpBasis sym, full;
  HsgpBasis age_basis, mid_basis, joint_basis;

  std::size_t beta0 = kNone, tau = kNone, nu = kNone;
  std::size_t surface_sigma = kNone, surface_ls = kNone;
  std::array<std::size_t, kPairs> surface_w{kNone, kNone, kNone};
  std::size_t rho = kNone;
  std::size_t age_w = kNone, age_sigma = kNone, age_ls = kNone;
  std::size_t mid_w = kNone, mid_sigma = kNone, mid_ls = kNone;
  std::size_t joint_w = kNone, joint_sigma = kNone, joint_ls = kNone;
  std::size_t hill_gamma = kNone, hill_zeta = kNone, hill_eta = kNone;

  std::vector<detail::PriorTerm> priors;

  const HsgpBasis& pair_basis(int p) const { return p == 2 ? full : sym; }

  struct Surface {
    SpectralWeights sw;
    Eigen::VectorXd w;
    double sigma = 1.0;
    double ls[2] = {1.0, 1.0};
  };

  struct Batch {  // R one-dimensional GPs sharing hyperparameters
    SpectralWeights sw;
    Eigen::MatrixXd w;  // M x R
    double sigma = 1.0;
    double ls[2] = {1.0, 1.0};
    Eigen::MatrixXd values;  // grid x R
  };

  struct Components {
    double beta0 = 0.0;
    Eigen::VectorXd tau;  // T, with the pin applied
    std::vector<std::array<Surface, kPairs>> surfaces;
    std::vector<std::array<Eigen::MatrixXd, kSurfaces>> m;  // intensity surfaces per (t, q)
    std::vector<std::array<Eigen::MatrixXd, kSurfaces>> band_sum;  // A x C
    std::vector<Eigen::MatrixXd> fat;  // per r = 0..Rmax, A x C
    Eigen::VectorXd rho;
    HillCurve hill;
    Batch age, mid;
    Surface joint;
    std::vector<Eigen::MatrixXd> joint_values;  // per repeat, A x C
    double nu = 1.0;
  };

  Components forward(const ParamEval& pe) const;
  double fat_value(const Components& c, int r, int a, int band) const;
  Eigen::MatrixXd surface_values(const Surface& s, int p) const;
  Batch batch_forward(const HsgpBasis& basis, std::size_t w, std::size_t sigma, std::size_t ls,
                      const ParamEval& pe) const;
  void batch_backward(const HsgpBasis& basis, const Batch& b, const Eigen::MatrixXd& d_values, std::size_t w,
                      std::size_t sigma, std::size_t ls, ParamEval& pe) const;
  double log_posterior(const ParamLayout& layout, const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                       Eigen::VectorXd* pointwise) const;
};

BrcModel::BrcModel(ModelSpec spec, BrcData data) : Model(std::move(spec)), data_(std::move(data)) {
  spec_.validate();
  data_.validate();
  if (spec_.family != ModelFamily::aggregated_brc) throw ConfigError("BRC data needs the aggregated_brc family");
  auto impl = std::make_shared<Impl>();
  Impl& m = *impl;
  m.T = data_.waves;
  m.A = data_.ages;
  m.C = static_cast<int>(data_.bands.size());
  m.fatigue = spec_.fatigue.kind;
  m.pin_first_wave = spec_.pin_first_wave;
  m.Rmax = data_.max_repeat;
  m.m_surface = spec_.surface_gp.m;
  m.m_fatigue = spec_.age_gp.m;

  m.log_pop.resize(2, m.A);
  for (int h = 0; h < 2; ++h) {
    for (int b = 0; b < m.A; ++b) {
      const double p = data_.population.count(h, b);
      if (!(p > 0.0)) throw DataError("population counts must be positive");
      m.log_pop(h, b) = std::log(p);
    }
  }
  m.band_of_age.assign(static_cast<std::size_t>(m.A), -1);
  for (int c = 0; c < m.C; ++c) {
    const auto& band = data_.bands[static_cast<std::size_t>(c)];
    m.band_range.emplace_back(band.lo, band.width());
    for (int a = band.lo; a <= band.hi; ++a) m.band_of_age[static_cast<std::size_t>(a)] = c;
  }
  for (const auto& cell : data_.cells) {
    CellInfo ci;
    ci.t = cell.wave;
    ci.r = cell.repeat;
    ci.a = cell.age;
    ci.g = cell.gender;
    ci.band = cell.band;
    ci.y = cell.y;
    if (cell.contact_gender != ContactGender::any) ci.h_lo = ci.h_hi = static_cast<int>(cell.contact_gender);
    ci.scale = cell.participants * data_.missingness.at(cell.wave, cell.age, cell.gender);
    m.cells.push_back(ci);
  }

  // Ages are scaled to [-1, 1] over the grid.
  const double half = m.A > 1 ? 0.5 * (m.A - 1) : 1.0;
  auto scale_age = [&](double a) { return (a - half) / half; };
  std::vector<double> x(static_cast<std::size_t>(m.A));
  for (int a = 0; a < m.A; ++a) x[static_cast<std::size_t>(a)] = scale_age(a);
  std::vector<double> mids;
  for (int mid : data_.bands.midpoints()) mids.push_back(scale_age(mid));
  m.sym = build_hsgp_2d_symmetric(x, x, m.m_surface, spec_.surface_gp.c);
  m.full = build_hsgp_2d(x, x, m.m_surface, m.m_surface, spec_.surface_gp.c);

  std::map<std::string, PriorSpec> defaults;
  const auto std_normal = PriorSpec::normal(0.0, 1.0);
  auto add = [&](const char* name, Eigen::Index size, Transform t, PriorSpec p) {
    const auto b = layout_.add(name, size, t);
    defaults[name] = p;
    return b;
  };
  auto add_scalar = [&](const char* name, Transform t, PriorSpec p) {
    const auto b = layout_.add_scalar(name, t);
    defaults[name] = p;
    return b;
  };

  m.beta0 = add_scalar("beta0", Transform::identity, PriorSpec::normal(0.0, 10.0));
  const int free_waves = m.pin_first_wave ? m.T - 1 : m.T;
  if (free_waves > 0) m.tau = add("tau", free_waves, Transform::identity, std_normal);
  m.surface_sigma = add("surface_sigma", kPairs * m.T, Transform::log, PriorSpec::cauchy_pos(0.0, 1.0));
  m.surface_ls = add("surface_lengthscale", 2 * kPairs * m.T, Transform::log, PriorSpec::inv_gamma(5.0, 5.0));
  m.surface_w[0] = add("surface_w_mm", m.T * m.sym.size(), Transform::identity, std_normal);
  m.surface_w[1] = add("surface_w_ff", m.T * m.sym.size(), Transform::identity, std_normal);
  m.surface_w[2] = add("surface_w_mf", m.T * m.full.size(), Transform::identity, std_normal);
  m.nu = add_scalar("nu", Transform::log, PriorSpec::exponential(1.0));

  const bool variant = m.fatigue == FatigueKind::variant_a || m.fatigue == FatigueKind::variant_b ||
                       m.fatigue == FatigueKind::variant_c;
  if (m.fatigue == FatigueKind::independent_effects || variant) {
    m.R = spec_.fatigue.max_repeat > 0 ? spec_.fatigue.max_repeat : std::max(m.Rmax, 1);
    m.rho = add("rho", m.R, Transform::identity, std_normal);
  }
  const auto sigma_prior = PriorSpec::cauchy_pos(0.0, 1.0);
  const auto ls_prior = PriorSpec::inv_gamma(5.0, 5.0);
  if (m.fatigue == FatigueKind::variant_a || m.fatigue == FatigueKind::variant_b) {
    m.age_basis = build_hsgp_1d(x, m.m_fatigue, spec_.age_gp.c);
    m.age_w = add("rho_age_w", m.R * m.m_fatigue, Transform::identity, std_normal);
    m.age_sigma = add_scalar("rho_age_sigma", Transform::log, sigma_prior);
    m.age_ls = add_scalar("rho_age_lengthscale", Transform::log, ls_prior);
  }
  if (m.fatigue == FatigueKind::variant_b) {
    m.mid_basis = build_hsgp_1d(mids, m.m_fatigue, spec_.age_gp.c, -1.0, 1.0);
    m.mid_w = add("rho_mid_w", m.R * m.m_fatigue, Transform::identity, std_normal);
    m.mid_sigma = add_scalar("rho_mid_sigma", Transform::log, sigma_prior);
    m.mid_ls = add_scalar("rho_mid_lengthscale", Transform::log, ls_prior);
  }
  if (m.fatigue == FatigueKind::variant_c) {
    m.joint_basis = build_hsgp_2d(x, mids, m.m_fatigue, m.m_fatigue, spec_.age_gp.c);
    m.joint_w = add("rho_joint_w", m.R * m.joint_basis.size(), Transform::identity, std_normal);
    m.joint_sigma = add_scalar("rho_joint_sigma", Transform::log, sigma_prior);
    m.joint_ls = add("rho_joint_lengthscale", 2, Transform::log, ls_prior);
  }
  if (m.fatigue == FatigueKind::hill) {
    m.hill_gamma = add_scalar("hill_gamma", Transform::log, PriorSpec::half_normal_pos(0.0, 1.0));
    m.hill_zeta = add_scalar("hill_zeta", Transform::identity, std_normal);
    m.hill_eta = add_scalar("hill_eta", Transform::log, PriorSpec::exponential(1.0));
  }
  m.priors = detail::resolve_priors(layout_, defaults, spec_.priors);
  impl_ = std::move(impl);
}

Eigen::MatrixXd BrcModel::Impl::surface_values(const Surface& s, int p) const {
  const HsgpBasis& basis = pair_basis(p);
  const Eigen::MatrixXd B = coefficient_matrix(basis, s.sw.sqrt_density.cwiseProduct(s.w), m_surface);
  Eigen::MatrixXd F = basis.phi_a * B * basis.phi_b.transpose();
  if (basis.symmetric) F = 0.5 * (F + F.transpose()).eval();
  return F;
}

BrcModel::Impl::Batch BrcModel::Impl::batch_forward(const HsgpBasis& basis, std::size_t w, std::size_t sigma,
                                                    std::size_t ls, const ParamEval& pe) const {
  Batch b;
  const Eigen::Index M = basis.size();
  b.w = Eigen::Map<const Eigen::MatrixXd>(pe.value(w).data(), M, R);
  b.sigma = pe.scalar(sigma);
  b.ls[0] = pe.scalar(ls);
  b.sw = spectral_weights(basis, KernelFamily::squared_exponential, b.sigma, std::span<const double>(b.ls, 1));
  b.values = basis.phi * (b.sw.sqrt_density.asDiagonal() * b.w);
  return b;
}

void BrcModel::Impl::batch_backward(const HsgpBasis& basis, const Batch& b, const Eigen::MatrixXd& d_values,
                                    std::size_t w, std::size_t sigma, std::size_t ls, ParamEval& pe) const {
  const Eigen::MatrixXd d_coef = basis.phi.transpose() * d_values;  // M x R
  const Eigen::MatrixXd d_w = b.sw.sqrt_density.asDiagonal() * d_coef;
  auto gw = pe.grad(w);
  gw += Eigen::Map<const Eigen::VectorXd>(d_w.data(), d_w.size());
  const Eigen::VectorXd gsw = d_w.cwiseProduct(b.w).rowwise().sum();
  pe.grad_scalar(sigma) += 0.5 * gsw.sum() / b.sigma;
  pe.grad_scalar(ls) += gsw.dot(b.sw.dlog_lengthscale[0]) / b.ls[0];
}

BrcModel::Impl::Components BrcModel::Impl::forward(const ParamEval& pe) const {
  Components c;
  c.beta0 = pe.scalar(beta0);
  c.tau = Eigen::VectorXd::Zero(T);
  if (tau != kNone) c.tau.tail(pe.value(tau).size()) = pe.value(tau);
  c.nu = pe.scalar(nu);

  const auto sig = pe.value(surface_sigma);
  const auto ls = pe.value(surface_ls);
  c.surfaces.resize(static_cast<std::size_t>(T));
  c.m.resize(static_cast<std::size_t>(T));
  c.band_sum.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    std::array<Eigen::MatrixXd, kPairs> F;
    for (int p = 0; p < kPairs; ++p) {
      auto& s = c.surfaces[t][p];
      const HsgpBasis& basis = pair_basis(p);
      const Eigen::Index M = basis.size();
      s.w = pe.value(surface_w[p]).segment(t * M, M);
      s.sigma = sig[t * kPairs + p];
      s.ls[0] = ls[2 * (t * kPairs + p)];
      s.ls[1] = ls[2 * (t * kPairs + p) + 1];
      s.sw = spectral_weights(basis, KernelFamily::matern52, s.sigma, std::span<const double>(s.ls, 2));
      F[p] = surface_values(s, p);
    }
    const std::array<Eigen::MatrixXd, kSurfaces> by_q{F[0], F[2], Eigen::MatrixXd(F[2].transpose()), F[1]};
    for (int q = 0; q < kSurfaces; ++q) {
      const int h = q % 2;
      Eigen::MatrixXd lm = by_q[q];
      lm.array() += c.beta0 + c.tau[t];
      lm.rowwise() += log_pop.row(h);
      if (!lm.allFinite()) throw NonFiniteError("non-finite log intensity in wave " + std::to_string(t + 1), 0);
      c.m[t][q] = lm.array().exp().matrix();
      Eigen::MatrixXd bs(A, C);
      for (int k = 0; k < C; ++k) {
        bs.col(k) = c.m[t][q].middleCols(band_range[k].first, band_range[k].second).rowwise().sum();
      }
      c.band_sum[t][q] = std::move(bs);
    }
  }

  // Fatigue tables.
  if (rho != kNone) c.rho = pe.value(rho);
  if (hill_gamma != kNone) c.hill = {pe.scalar(hill_gamma), pe.scalar(hill_zeta), pe.scalar(hill_eta)};
  if (age_w != kNone) c.age = batch_forward(age_basis, age_w, age_sigma, age_ls, pe);
  if (mid_w != kNone) c.mid = batch_forward(mid_basis, mid_w, mid_sigma, mid_ls, pe);
  if (joint_w != kNone) {
    const Eigen::Index M = joint_basis.size();
    c.joint.sigma = pe.scalar(joint_sigma);
    c.joint.ls[0] = pe.value(joint_ls)[0];
    c.joint.ls[1] = pe.value(joint_ls)[1];
    c.joint.sw = spectral_weights(joint_basis, KernelFamily::squared_exponential, c.joint.sigma,
                                  std::span<const double>(c.joint.ls, 2));
    c.joint.w = pe.value(joint_w);
    for (int k = 0; k < R; ++k) {
      const Eigen::VectorXd coef = c.joint.sw.sqrt_density.cwiseProduct(c.joint.w.segment(k * M, M));
      const Eigen::MatrixXd B = coefficient_matrix(joint_basis, coef, m_fatigue);
      c.joint_values.push_back(joint_basis.phi_a * B * joint_basis.phi_b.transpose());
    }
  }
  c.fat.assign(static_cast<std::size_t>(Rmax) + 1, Eigen::MatrixXd::Zero(A, C));
  for (int r = 1; r <= Rmax; ++r) {
    for (int a = 0; a < A; ++a) {
      for (int b = 0; b < C; ++b) c.fat[r](a, b) = fat_value(c, r, a, b);
    }
  }
  return c;
}

double BrcModel::Impl::fat_value(const Components& c, int r, int a, int band) const {
  if (r <= 0) return 0.0;
  const int k = std::min(r, std::max(R, 1)) - 1;
  switch (fatigue) {
    case FatigueKind::independent_effects: return c.rho[k];
    case FatigueKind::hill: return brc::hill(c.hill, r);
    case FatigueKind::variant_a:
    case FatigueKind::variant_b:
    case FatigueKind::variant_c: {
      FatigueLatents lat;
      lat.rho = c.rho[k];
      if (fatigue != FatigueKind::variant_c) lat.f_age = c.age.values(a, k);
      if (fatigue == FatigueKind::variant_b) lat.f_mid = c.mid.values(band, k);
      if (fatigue == FatigueKind::variant_c) lat.f_joint = c.joint_values[k](a, band);
      return fatigue_variant_term(fatigue, r, lat);
    }
    default: return 0.0;
  }
}

double BrcModel::Impl::log_posterior(const ParamLayout& layout, const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                                     Eigen::VectorXd* pointwise) const {
  if (theta.size() != layout.dim()) throw ConfigError("parameter vector has wrong length");
  ParamEval pe(layout, theta);
  const Components c = forward(pe);

  std::vector<std::array<Eigen::MatrixXd, kSurfaces>> K;
  std::vector<Eigen::MatrixXd> d_fat;
  if (grad) {
    K.resize(static_cast<std::size_t>(T));
    for (auto& per_t : K) {
      for (auto& k : per_t) k = Eigen::MatrixXd::Zero(A, C);
    }
    d_fat.assign(c.fat.size(), Eigen::MatrixXd::Zero(A, C));
  }
  if (pointwise) pointwise->resize(static_cast<Eigen::Index>(cells.size()));
  double d_nu = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    double sum = 0.0;
    for (int h = cell.h_lo; h <= cell.h_hi; ++h) sum += c.band_sum[cell.t][2 * cell.g + h](cell.a, cell.band);
    const double e_fat = std::exp(c.fat[cell.r](cell.a, cell.band));
    const double mu = cell.scale * e_fat * sum;
    if (!std::isfinite(mu)) throw NonFiniteError("non-finite cell mean", i);
    const auto lp = nb_logpmf(cell.y, mu, c.nu, Observation::nb1);
    pe.log_density += lp.logp;
    if (pointwise) (*pointwise)[static_cast<Eigen::Index>(i)] = lp.logp;
    if (!grad) continue;
    d_nu += lp.d_dispersion;
    const double k = lp.d_mean * cell.scale * e_fat;
    for (int h = cell.h_lo; h <= cell.h_hi; ++h) K[cell.t][2 * cell.g + h](cell.a, cell.band) += k;
    d_fat[cell.r](cell.a, cell.band) += lp.d_mean * mu;
  }
  detail::add_priors(priors, pe);
  if (!grad) return pe.finish(nullptr);

  pe.grad_scalar(nu) += d_nu;

  for (int t = 0; t < T; ++t) {
    std::array<Eigen::MatrixXd, kSurfaces> G;
    double total = 0.0;
    for (int q = 0; q < kSurfaces; ++q) {
      G[q] = Eigen::MatrixXd::Zero(A, A);
      for (int b = 0; b < A; ++b) {
        const int band = band_of_age[static_cast<std::size_t>(b)];
        if (band < 0) continue;
        G[q].col(b) = K[t][q].col(band).cwiseProduct(c.m[t][q].col(b));
      }
      total += G[q].sum();
    }
    pe.grad_scalar(beta0) += total;
    if (tau != kNone && (!pin_first_wave || t > 0)) pe.grad(tau)[pin_first_wave ? t - 1 : t] += total;

    const std::array<Eigen::MatrixXd, kPairs> G_pair{G[0], G[3], Eigen::MatrixXd(G[1] + G[2].transpose())};
    for (int p = 0; p < kPairs; ++p) {
      const HsgpBasis& basis = pair_basis(p);
      const auto& s = c.surfaces[t][p];
      const Eigen::MatrixXd dB = basis.phi_a.transpose() * G_pair[p] * basis.phi_b;
      const auto wg = weight_grad(s.sw, s.w, s.sigma, s.ls, 2, fold_coefficients(basis, dB));
      const Eigen::Index M = basis.size();
      pe.grad(surface_w[p]).segment(t * M, M) += wg.d_w;
      pe.grad(surface_sigma)[t * kPairs + p] += wg.d_sigma;
      pe.grad(surface_ls)[2 * (t * kPairs + p)] += wg.d_ls[0];
      pe.grad(surface_ls)[2 * (t * kPairs + p) + 1] += wg.d_ls[1];
    }
  }

  // Fatigue.
  switch (fatigue) {
    case FatigueKind::independent_effects:
      for (int r = 1; r <= Rmax; ++r) pe.grad(rho)[std::min(r, R) - 1] += d_fat[r].sum();
      break;
    case FatigueKind::hill:
      for (int r = 1; r <= Rmax; ++r) {
        const double s = d_fat[r].sum();
        if (s == 0.0) continue;
        const auto hg = hill_gradient(c.hill, r);
        pe.grad_scalar(hill_gamma) += s * hg.d_gamma;
        pe.grad_scalar(hill_zeta) += s * hg.d_zeta;
        pe.grad_scalar(hill_eta) += s * hg.d_eta;
      }
      break;
    case FatigueKind::variant_a:
    case FatigueKind::variant_b:
    case FatigueKind::variant_c: {
      // fat = -exp(x): d x = d fat * fat
      std::vector<Eigen::MatrixXd> dx(static_cast<std::size_t>(R), Eigen::MatrixXd::Zero(A, C));
      for (int r = 1; r <= Rmax; ++r) dx[std::min(r, R) - 1] += d_fat[r].cwiseProduct(c.fat[r]);
      for (int k = 0; k < R; ++k) pe.grad(rho)[k] += dx[k].sum();
      if (fatigue != FatigueKind::variant_c) {
        Eigen::MatrixXd d_age(A, R);
        for (int k = 0; k < R; ++k) d_age.col(k) = dx[k].rowwise().sum();
        batch_backward(age_basis, c.age, d_age, age_w, age_sigma, age_ls, pe);
      }
      if (fatigue == FatigueKind::variant_b) {
        Eigen::MatrixXd d_mid(C, R);
        for (int k = 0; k < R; ++k) d_mid.col(k) = dx[k].colwise().sum().transpose();
        batch_backward(mid_basis, c.mid, d_mid, mid_w, mid_sigma, mid_ls, pe);
      }
      if (fatigue == FatigueKind::variant_c) {
        const Eigen::Index M = joint_basis.size();
        double d_sigma = 0.0, d_l0 = 0.0, d_l1 = 0.0;
        for (int k = 0; k < R; ++k) {
          const Eigen::MatrixXd dB = joint_basis.phi_a.transpose() * dx[k] * joint_basis.phi_b;
          const Eigen::VectorXd w = c.joint.w.segment(k * M, M);
          const auto wg = weight_grad(c.joint.sw, w, c.joint.sigma, c.joint.ls, 2, fold_coefficients(joint_basis, dB));
          pe.grad(joint_w).segment(k * M, M) += wg.d_w;
          d_sigma += wg.d_sigma;
          d_l0 += wg.d_ls[0];
          d_l1 += wg.d_ls[1];
        }
        pe.grad_scalar(joint_sigma) += d_sigma;
        pe.grad(joint_ls)[0] += d_l0;
        pe.grad(joint_ls)[1] += d_l1;
      }
      break;
    }
    default: break;
  }
  return pe.finish(grad);
}

double BrcModel::log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  return impl_->log_posterior(layout_, theta, grad, nullptr);
}

Eigen::VectorXd BrcModel::pointwise_loglik(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out;
  impl_->log_posterior(layout_, theta, nullptr, &out);
  return out;
}

Eigen::MatrixXd BrcModel::log_intensity_surface(const Eigen::VectorXd& theta, int wave, int g, int h) const {
  const auto& m = *impl_;
  if (wave < 0 || wave >= m.T || g < 0 || g > 1 || h < 0 || h > 1) throw ConfigError("surface index out of range");
  ParamEval pe(layout_, theta);
  const auto c = m.forward(pe);
  return c.m[wave][2 * g + h].array().log().matrix();
}

double BrcModel::fatigue_term(const Eigen::VectorXd& theta, int r, int age, int band) const {
  const auto& m = *impl_;
  if (age < 0 || age >= m.A || band < 0 || band >= m.C) throw ConfigError("fatigue cell out of range");
  if (r <= 0) return 0.0;
  ParamEval pe(layout_, theta);
  const auto c = m.forward(pe);
  return m.fat_value(c, r, age, band);
}

}  // namespace brc
