#include "brc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "brc/config.hpp"
#include "brc/csv.hpp"
#include "brc/error.hpp"

namespace brc {

double mape(std::span<const double> estimate, std::span<const double> baseline) {
  if (estimate.size() != baseline.size()) throw DataError("MAPE inputs differ in length");
  if (baseline.empty()) throw DataError("MAPE of an empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (!(baseline[i] > 0.0)) throw DataError("MAPE baseline must be positive");
    sum += std::abs(estimate[i] - baseline[i]) / baseline[i];
  }
  return 100.0 * sum / static_cast<double>(baseline.size());
}

double interval_coverage(std::span<const double> baseline, std::span<const double> lower,
                         std::span<const double> upper) {
  if (baseline.size() != lower.size() || baseline.size() != upper.size()) {
    throw DataError("coverage inputs differ in length");
  }
  if (baseline.empty()) throw DataError("coverage of an empty series");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i] >= lower[i] && baseline[i] <= upper[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(baseline.size());
}

MseAndPpc mse_and_ppc(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& replicates,
                      std::span<const double> observed, double lower, double upper) {
  const auto n = static_cast<Eigen::Index>(observed.size());
  if (predictions.cols() != n || replicates.cols() != n) throw DataError("prediction and observation counts differ");
  if (predictions.rows() < 1 || replicates.rows() < 1) throw DataError("no draws");
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) throw ConfigError("invalid posterior predictive interval");
  MseAndPpc out;
  const Eigen::VectorXd mean = predictions.colwise().mean().transpose();
  double sse = 0.0;
  out.ppc.tail_probability.resize(n);
  const double probs[2] = {lower, upper};
  for (Eigen::Index i = 0; i < n; ++i) {
    sse += (mean[i] - observed[static_cast<std::size_t>(i)]) * (mean[i] - observed[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd rep = replicates.col(i);
    out.ppc.tail_probability[i] = (rep.array() >= observed[static_cast<std::size_t>(i)]).cast<double>().mean();
    std::vector<double> v(rep.data(), rep.data() + rep.size());
    std::sort(v.begin(), v.end());
    double q[2];
    for (int j = 0; j < 2; ++j) {
      const double h = (static_cast<double>(v.size()) - 1.0) * probs[j];
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      q[j] = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    }
    const double y = observed[static_cast<std::size_t>(i)];
    if (y < q[0] || y > q[1]) ++out.ppc.flagged;
  }
  out.mse = n > 0 ? sse / static_cast<double>(n) : 0.0;
  out.ppc.flagged_fraction = n > 0 ? static_cast<double>(out.ppc.flagged) / static_cast<double>(n) : 0.0;
  return out;
}

GpdFit fit_generalized_pareto(std::span<const double> exceedances) {
  std::vector<double> x(exceedances.begin(), exceedances.end());
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 2) throw DataError("generalized Pareto fit needs at least two exceedances");
  std::sort(x.begin(), x.end());
  if (x.back() <= 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
  constexpr double prior = 3.0;
  const auto m = static_cast<Eigen::Index>(30 + std::floor(std::sqrt(static_cast<double>(n))));
  const double x_star = x[static_cast<std::size_t>(std::max<Eigen::Index>(
      static_cast<Eigen::Index>(std::floor(n / 4.0 + 0.5)) - 1, 0))];
  Eigen::VectorXd b(m), L(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    b[j] = (1.0 - std::sqrt(static_cast<double>(m) / (j + 1 - 0.5))) / (prior * x_star) + 1.0 / x.back();
    double k = 0.0;
    for (double v : x) k += std::log1p(-b[j] * v);
    k /= static_cast<double>(n);
    L[j] = n * (std::log(-b[j] / k) - k - 1.0);
  }
  Eigen::VectorXd w(m);
  for (Eigen::Index j = 0; j < m; ++j) w[j] = 1.0 / (L.array() - L[j]).exp().sum();
  w /= w.sum();
  const double b_hat = b.dot(w);
  double k = 0.0;
  for (double v : x) k += std::log1p(-b_hat * v);
  k /= static_cast<double>(n);
  const double sigma = -k / b_hat;
  // Weakly informative shrinkage towards 0.5.
  k = (k * n + 0.5 * 10.0) / (n + 10.0);
  return {k, sigma};
}

std::vector<Eigen::Index> LooResult::flagged(double threshold) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < pareto_k.size(); ++i) {
    if (!(pareto_k[i] <= threshold)) out.push_back(i);
  }
  return out;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double gpd_quantile(double p, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

}  // namespace

LooResult psis_loo(const Eigen::MatrixXd& loglik) {
  const Eigen::Index S = loglik.rows(), n = loglik.cols();
  if (S < 100) throw DataError("PSIS-LOO needs at least 100 draws");
  if (n < 1) throw DataError("PSIS-LOO needs at least one observation");
  LooResult out;
  out.pointwise.resize(n);
  out.pareto_k.resize(n);
  const auto M = static_cast<Eigen::Index>(
      std::ceil(std::min(0.2 * static_cast<double>(S), 3.0 * std::sqrt(static_cast<double>(S)))));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(S));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd lw = -loglik.col(i);
    lw.array() -= lw.maxCoeff();
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return lw[a] < lw[b]; });
    const double cutoff = lw[order[static_cast<std::size_t>(S - M - 1)]];
    std::vector<double> exceed;
    for (Eigen::Index s = S - M; s < S; ++s) exceed.push_back(std::exp(lw[order[static_cast<std::size_t>(s)]]) - std::exp(cutoff));
    double k = std::numeric_limits<double>::infinity();
    if (exceed.back() > 0.0) {
      const auto fit = fit_generalized_pareto(exceed);
      k = fit.k;
      if (std::isfinite(k)) {
        for (Eigen::Index z = 0; z < M; ++z) {
          const double p = (z + 1 - 0.5) / static_cast<double>(M);
          const double v = std::log(std::exp(cutoff) + gpd_quantile(p, fit.k, fit.sigma));
          lw[order[static_cast<std::size_t>(S - M + z)]] = std::min(v, 0.0);
        }
      }
    }
    out.pareto_k[i] = k;
    const Eigen::VectorXd lwn = lw.array() - log_sum_exp(lw);
    out.pointwise[i] = log_sum_exp(lwn + loglik.col(i));
  }
  out.elpd = out.pointwise.sum();
  const double mean = out.pointwise.mean();
  const double var = n > 1 ? (out.pointwise.array() - mean).square().sum() / (n - 1.0) : 0.0;
  out.elpd_se = std::sqrt(n * var);
  return out;
}

std::vector<LooComparison> loo_compare(const std::vector<std::pair<std::string, LooResult>>& fits) {
  if (fits.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i) {
    if (fits[i].second.elpd > fits[best].second.elpd) best = i;
  }
  const auto& ref = fits[best].second.pointwise;
  std::vector<LooComparison> out;
  for (const auto& [name, r] : fits) {
    if (r.pointwise.size() != ref.size()) throw DataError("LOO comparison needs the same observations in every fit");
    LooComparison c;
    c.model = name;
    c.elpd = r.elpd;
    c.delta = r.elpd - fits[best].second.elpd;
    const Eigen::VectorXd diff = r.pointwise - ref;
    const auto n = static_cast<double>(diff.size());
    const double var = n > 1 ? (diff.array() - diff.mean()).square().sum() / (n - 1.0) : 0.0;
    c.se = std::sqrt(n * var);
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(), [](const LooComparison& a, const LooComparison& b) { return a.elpd > b.elpd; });
  return out;
}

void write_loo_table(std::ostream& out, const std::vector<LooComparison>& rows) {
  out << "model,elpd,se_diff,delta\n";
  for (const auto& r : rows) {
    out << csv::join({r.model, format_double(r.elpd), format_double(r.se), format_double(r.delta)}) << '\n';
  }
}

}  // namespace brc
