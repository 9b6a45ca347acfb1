#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <unsupported/Eigen/FFT>

#include "brc/config.hpp"
#include "brc/csv.hpp"
#include "brc/error.hpp"
#include "brc/inference.hpp"

namespace brc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Splits each chain into two halves (dropping the middle draw when odd).
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& draws) {
  const Eigen::Index n = draws.rows() / 2;
  const Eigen::Index offset = draws.rows() - n;
  Eigen::MatrixXd out(n, 2 * draws.cols());
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    out.col(2 * c) = draws.col(c).head(n);
    out.col(2 * c + 1) = draws.col(c).segment(offset, n);
  }
  return out;
}

// Biased autocovariance by FFT, lags 0..n-1.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::Index m = 1;
  while (m < 2 * n) m *= 2;
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  const double mean = x.mean();
  for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> back;
  fft.inv(back, freq);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = back[static_cast<std::size_t>(i)] / static_cast<double>(n);
  return out;
}

// Geyer initial monotone sequence ESS over columns of `chains`.
double ess_raw(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows(), M = chains.cols();
  if (n < 4 || M < 1) return kNaN;
  Eigen::MatrixXd acov(n, M);
  Eigen::VectorXd means(M), vars(M);
  for (Eigen::Index c = 0; c < M; ++c) {
    acov.col(c) = autocovariance(chains.col(c));
    means[c] = chains.col(c).mean();
    vars[c] = acov(0, c) * n / (n - 1.0);
  }
  const double mean_var = vars.mean();
  double var_plus = mean_var * (n - 1.0) / n;
  if (M > 1) var_plus += (means.array() - means.mean()).square().sum() / (M - 1.0);
  if (!(var_plus > 0.0)) return kNaN;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
  auto mean_acov = [&](Eigen::Index t) { return acov.row(t).mean(); };
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[0] = rho_even;
  rho[1] = rho_odd;
  Eigen::Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;
  for (t = 1; t <= max_t - 4; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
      rho[t + 2] = rho[t + 1];
    }
  }
  const double total = static_cast<double>(n * M);
  double tau = -1.0 + 2.0 * rho.head(std::min(max_t + 1, n)).sum() + (max_t + 1 < n ? rho[max_t + 1] : 0.0);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

// Normal scores of pooled average ranks.
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws) {
  const Eigen::Index S = draws.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(S));
  std::iota(order.begin(), order.end(), 0);
  const double* v = draws.data();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::MatrixXd out(draws.rows(), draws.cols());
  double* o = out.data();
  for (Eigen::Index i = 0; i < S;) {
    Eigen::Index j = i;
    while (j + 1 < S && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * (i + j) + 1.0;
    const double p = (rank - 0.375) / (S + 0.25);
    const double z = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    for (Eigen::Index k = i; k <= j; ++k) o[order[k]] = z;
    i = j + 1;
  }
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("sampler needs at least one chain");
  if (warmup < 0 || sampling < 1) throw ConfigError("warmup must be >= 0 and sampling >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw ConfigError("max_tree_depth must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (!(init_radius > 0.0)) throw ConfigError("init_radius must be positive");
}

double Diagnostics::max_rhat() const {
  double m = kNaN;
  for (Eigen::Index i = 0; i < rhat.size(); ++i) {
    if (std::isnan(rhat[i])) continue;
    if (std::isnan(m) || rhat[i] > m) m = rhat[i];
  }
  return m;
}

double Diagnostics::min_ess() const {
  double m = kNaN;
  for (Eigen::Index i = 0; i < ess_bulk.size(); ++i) {
    if (std::isnan(ess_bulk[i])) continue;
    if (std::isnan(m) || ess_bulk[i] < m) m = ess_bulk[i];
  }
  return m;
}

double split_rhat(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 4 || draws.cols() < 1) return kNaN;
  const Eigen::MatrixXd s = split_chains(draws);
  const Eigen::Index n = s.rows(), M = s.cols();
  const Eigen::VectorXd means = s.colwise().mean().transpose();
  Eigen::VectorXd vars(M);
  for (Eigen::Index c = 0; c < M; ++c) vars[c] = (s.col(c).array() - means[c]).square().sum() / (n - 1.0);
  const double W = vars.mean();
  if (!(W > 0.0)) return kNaN;
  const double B = n * (means.array() - means.mean()).square().sum() / (M - 1.0);
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double ess_bulk(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 4) return kNaN;
  const double first = draws(0, 0);
  if ((draws.array() == first).all()) return kNaN;
  return ess_raw(split_chains(rank_normalize(draws)));
}

Diagnostics rhat_ess(const PosteriorDraws& draws) {
  Diagnostics d;
  d.names = draws.output_names;
  const auto K = static_cast<Eigen::Index>(draws.output_names.size());
  d.rhat.resize(K);
  d.ess_bulk.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::MatrixXd m = draws.by_chain(k);
    d.rhat[k] = split_rhat(m);
    d.ess_bulk[k] = ess_bulk(m);
  }
  d.divergences = draws.divergences();
  return d;
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile probability outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Eigen::VectorXd quantiles(std::span<const double> values, std::span<const double> probs) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Eigen::VectorXd out(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile probability outside [0, 1]");
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    out[static_cast<Eigen::Index>(i)] = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }
  return out;
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws, std::span<const double> probs) {
  static const double kDefault[] = {0.025, 0.25, 0.5, 0.75, 0.975};
  if (probs.empty()) probs = kDefault;
  std::vector<ParameterSummary> out;
  const Eigen::Index n = draws.outputs.rows();
  for (std::size_t k = 0; k < draws.output_names.size(); ++k) {
    const Eigen::VectorXd col = draws.outputs.col(static_cast<Eigen::Index>(k));
    ParameterSummary s;
    s.name = draws.output_names[k];
    s.mean = col.mean();
    s.sd = n > 1 ? std::sqrt((col.array() - s.mean).square().sum() / (n - 1.0)) : 0.0;
    const std::span<const double> values(col.data(), static_cast<std::size_t>(n));
    s.median = quantile(values, 0.5);
    s.probs.assign(probs.begin(), probs.end());
    const Eigen::VectorXd q = quantiles(values, probs);
    s.values.assign(q.data(), q.data() + q.size());
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<ParameterSummary>& summary,
                       const Diagnostics* diagnostics) {
  std::vector<std::string> header = {"name", "mean", "sd", "median"};
  if (!summary.empty()) {
    for (double p : summary.front().probs) header.push_back("q" + format_double(p));
  }
  if (diagnostics) {
    header.push_back("rhat");
    header.push_back("ess_bulk");
  }
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    std::vector<std::string> row = {s.name, format_double(s.mean), format_double(s.sd), format_double(s.median)};
    for (double v : s.values) row.push_back(format_double(v));
    if (diagnostics) {
      const auto idx = static_cast<Eigen::Index>(i);
      row.push_back(idx < diagnostics->rhat.size() ? format_double(diagnostics->rhat[idx]) : "NA");
      row.push_back(idx < diagnostics->ess_bulk.size() ? format_double(diagnostics->ess_bulk[idx]) : "NA");
    }
    out << csv::join(row) << '\n';
  }
}

}  // namespace brc
