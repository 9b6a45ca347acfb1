#include <cmath>
#include <deque>
#include <limits>

#include <spdlog/spdlog.h>

#include "brc/error.hpp"
#include "brc/inference.hpp"
#include "brc/rng.hpp"

namespace brc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimises f = -log density.
struct Objective {
  const LogDensity& density;
  int evaluations = 0;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++evaluations;
    const double lp = density.log_density(x, &g);
    if (!std::isfinite(lp)) {
      g = Eigen::VectorXd::Zero(x.size());
      return kInf;
    }
    g = -g;
    return -lp;
  }
};

// Strong-Wolfe line search: bracketing followed by a safeguarded
// quadratic-interpolation zoom. Returns 0 when no acceptable step was found.
double wolfe_search(Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& gx,
                    const Eigen::VectorXd& dir, double step, Eigen::VectorXd& x_new, double& f_new,
                    Eigen::VectorXd& g_new) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const double d0 = gx.dot(dir);
  auto eval = [&](double a, double& fa, double& da) {
    x_new = x + a * dir;
    fa = f(x_new, g_new);
    da = std::isfinite(fa) ? g_new.dot(dir) : 0.0;
  };
  auto sufficient = [&](double a, double fa) { return std::isfinite(fa) && fa <= fx + c1 * a * d0; };

  auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi) -> double {
    for (int it = 0; it < 50; ++it) {
      const double w = hi - lo;
      if (std::abs(w) < 1e-16 * std::max(1.0, std::abs(lo))) break;
      double t = lo + 0.5 * w;
      if (std::isfinite(f_hi)) {
        const double denom = 2.0 * (f_hi - f_lo - d_lo * w);
        if (denom > 0.0) t = lo - d_lo * w * w / denom;
      }
      const double a_min = std::min(lo, hi) + 0.1 * std::abs(w);
      const double a_max = std::max(lo, hi) - 0.1 * std::abs(w);
      t = std::clamp(t, a_min, a_max);
      double ft = 0.0, dt = 0.0;
      eval(t, ft, dt);
      if (!sufficient(t, ft) || ft >= f_lo) {
        hi = t;
        f_hi = ft;
      } else {
        if (std::abs(dt) <= -c2 * d0) return t;
        if (dt * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = t;
        f_lo = ft;
        d_lo = dt;
      }
    }
    if (lo > 0.0) {
      double fl = 0.0, dl = 0.0;
      eval(lo, fl, dl);
      f_new = fl;
      return lo;
    }
    return 0.0;
  };

  double a_prev = 0.0, f_prev = fx, d_prev = d0;
  double a = step;
  for (int it = 0; it < 60; ++it) {
    double fa = 0.0, da = 0.0;
    eval(a, fa, da);
    f_new = fa;
    if (!sufficient(a, fa) || (it > 0 && fa >= f_prev)) {
      const double r = zoom(a_prev, f_prev, d_prev, a, fa);
      return r;
    }
    if (std::abs(da) <= -c2 * d0) return a;
    if (da >= 0.0) return zoom(a, fa, da, a_prev, f_prev);
    a_prev = a;
    f_prev = fa;
    d_prev = da;
    a *= 2.0;
  }
  f_new = f_prev;
  if (a_prev > 0.0) {
    x_new = x + a_prev * dir;
    f_new = f(x_new, g_new);
  }
  return a_prev;
}

MapResult lbfgs(const LogDensity& density, Eigen::VectorXd x, const OptimizerConfig& cfg, bool& converged) {
  Objective f{density};
  Eigen::VectorXd g;
  double fx = f(x, g);
  converged = false;
  MapResult out;
  if (!std::isfinite(fx)) {
    out.theta = x;
    out.logp = -kInf;
    out.grad_norm = kInf;
    return out;
  }
  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> Rho;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tolerance) {
      converged = true;
      break;
    }
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = Rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    double gamma = 1.0;
    if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    Eigen::VectorXd dir = gamma * q;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = Rho[i] * Y[i].dot(dir);
      dir += S[i] * (alpha[i] - beta);
    }
    dir = -dir;
    if (g.dot(dir) >= 0.0) {
      dir = -g;
      S.clear();
      Y.clear();
      Rho.clear();
    }
    const double first = S.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    Eigen::VectorXd x_new, g_new;
    double f_new = fx;
    const double a = wolfe_search(f, x, fx, g, dir, first, x_new, f_new, g_new);
    if (a == 0.0 || !std::isfinite(f_new)) {
      // No progress along this direction; a steepest-descent restart was already tried.
      if (S.empty()) break;
      S.clear();
      Y.clear();
      Rho.clear();
      continue;
    }
    const Eigen::VectorXd s = x_new - x, y = g_new - g;
    const double sy = s.dot(y);
    const double rel_change = std::abs(fx - f_new) / std::max({std::abs(fx), std::abs(f_new), 1.0});
    x = x_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      Rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > cfg.history) {
        S.pop_front();
        Y.pop_front();
        Rho.pop_front();
      }
    }
    if (rel_change < 1e-14 && g.lpNorm<Eigen::Infinity>() < std::sqrt(cfg.grad_tolerance)) {
      converged = true;
      ++it;
      break;
    }
  }
  if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tolerance) converged = true;
  out.theta = x;
  out.logp = -fx;
  out.grad_norm = g.lpNorm<Eigen::Infinity>();
  out.iterations = it;
  return out;
}

}  // namespace

MapResult map_fit(const LogDensity& density, int restarts, std::uint64_t seed,
                  const std::optional<Eigen::VectorXd>& init, const OptimizerConfig& cfg) {
  if (restarts < 0) throw ConfigError("restarts must be >= 0");
  if (cfg.max_iterations < 1 || !(cfg.grad_tolerance > 0.0) || cfg.history < 1) {
    throw ConfigError("invalid optimizer settings");
  }
  const Eigen::Index dim = density.dim();
  std::vector<Eigen::VectorXd> starts;
  if (init) {
    if (init->size() != dim) throw ConfigError("initial value has the wrong length");
    starts.push_back(*init);
  }
  Rng rng = make_rng(seed, 0x6f7074);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = u(rng);
    starts.push_back(x);
  }
  if (starts.empty()) starts.push_back(Eigen::VectorXd::Zero(dim));

  std::optional<MapResult> best;
  double best_grad = kInf;
  for (const auto& x0 : starts) {
    bool converged = false;
    MapResult r = lbfgs(density, x0, cfg, converged);
    best_grad = std::min(best_grad, r.grad_norm);
    spdlog::debug("L-BFGS start: logp {:.6g}, |grad| {:.3g}, {} iterations", r.logp, r.grad_norm, r.iterations);
    if (converged && (!best || r.logp > best->logp)) best = r;
  }
  if (!best) {
    throw ConvergenceError("optimizer did not converge from any start; smallest gradient norm " +
                           std::to_string(best_grad));
  }
  return *best;
}

}  // namespace brc
