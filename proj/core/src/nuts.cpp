#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <thread>

#include <spdlog/spdlog.h>

#include "brc/error.hpp"
#include "brc/inference.hpp"
#include "brc/rng.hpp"

namespace brc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxDeltaH = 1000.0;

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Inverse mass matrix: diagonal or dense (with its Cholesky factor).
struct Metric {
  bool dense = false;
  Eigen::VectorXd diag;
  Eigen::MatrixXd full;
  Eigen::MatrixXd chol;  // lower factor of `full`

  static Metric identity(Eigen::Index dim, bool dense) {
    Metric m;
    m.dense = dense;
    m.diag = Eigen::VectorXd::Ones(dim);
    if (dense) {
      m.full = Eigen::MatrixXd::Identity(dim, dim);
      m.chol = m.full;
    }
    return m;
  }

  void set_dense(Eigen::MatrixXd cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return;  // keep the previous metric
    full = std::move(cov);
    chol = llt.matrixL();
  }

  Eigen::VectorXd sharp(const Eigen::VectorXd& p) const {
    return dense ? Eigen::VectorXd(full * p) : Eigen::VectorXd(diag.cwiseProduct(p));
  }
};

struct PhasePoint {
  Eigen::VectorXd q, p, grad;
  double logp = -kInf;
};

class DualAveraging {
 public:
  explicit DualAveraging(double delta) : delta_(delta) {}

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept) {
    ++counter_;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / kGamma;
    const double x_eta = std::pow(static_cast<double>(counter_), -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  int counter_ = 0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Windowed variance adaptation with a fast initial buffer, doubling slow
// windows and a terminal buffer.
class MetricWindows {
 public:
  MetricWindows(int warmup, Eigen::Index dim) : warmup_(warmup), dim_(dim) {
    if (warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + base_window_ - 1;
    reset();
  }

  /// Returns true when a window closed and `metric` was updated.
  bool learn(const Eigen::VectorXd& q, Metric& metric) {
    if (!enabled_) {
      ++counter_;
      return false;
    }
    if (counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_) add(q, metric.dense);
    if (counter_ == next_window_ && counter_ != warmup_) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      const double shrink = n / (n + 5.0), jitter = 1e-3 * (5.0 / (n + 5.0));
      if (metric.dense) {
        Eigen::MatrixXd cov = n > 1 ? Eigen::MatrixXd(m2_full_ / (n - 1.0)) : Eigen::MatrixXd::Identity(dim_, dim_);
        cov *= shrink;
        cov.diagonal().array() += jitter;
        metric.set_dense(std::move(cov));
      } else {
        Eigen::VectorXd var = n > 1 ? Eigen::VectorXd(m2_ / (n - 1.0)) : Eigen::VectorXd::Ones(dim_);
        metric.diag = shrink * var.array() + jitter;
      }
      reset();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  void add(const Eigen::VectorXd& q, bool dense) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    if (dense) {
      m2_full_.noalias() += delta * (q - mean_).transpose();
    } else {
      m2_ += delta.cwiseProduct(q - mean_);
    }
  }

  void reset() {
    n_ = 0;
    mean_ = Eigen::VectorXd::Zero(dim_);
    m2_ = Eigen::VectorXd::Zero(dim_);
    m2_full_.resize(0, 0);
    m2_full_ = Eigen::MatrixXd::Zero(dim_, dim_);
  }

  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  int warmup_;
  Eigen::Index dim_;
  bool enabled_ = true;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 25;
  int next_window_ = 0;
  int counter_ = 0;
  long n_ = 0;
  Eigen::VectorXd mean_, m2_;
  Eigen::MatrixXd m2_full_;
};

struct Transition {
  double accept = 0.0;
  int depth = 0;
  bool divergent = false;
};

class Nuts {
 public:
  Nuts(const LogDensity& density, Metric metric, int max_depth, Rng& rng)
      : density_(density), metric_(std::move(metric)), max_depth_(max_depth), rng_(rng) {}

  double step = 1.0;
  Metric& metric() { return metric_; }

  void evaluate(PhasePoint& z) const { z.logp = density_.log_density(z.q, &z.grad); }

  Transition transition(PhasePoint& z) {
    sample_momentum(z);
    const double H0 = hamiltonian(z);
    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;

    Eigen::VectorXd p_sharp = sharp(z.p);
    Eigen::VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp;
    Eigen::VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp;
    Eigen::VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp;
    Eigen::VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp;
    Eigen::VectorXd rho = z.p;
    const Eigen::Index n = z.q.size();

    double log_sum_weight = 0.0;
    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;
    int depth = 0;

    while (depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n), rho_bck = Eigen::VectorXd::Zero(n);
      bool valid = false;
      double log_sum_weight_subtree = -kInf;
      if (uniform_(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        current_ = z_fwd;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, H0, 1.0,
                           log_sum_weight_subtree);
        z_fwd = current_;
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        current_ = z_bck;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, H0,
                           -1.0, log_sum_weight_subtree);
        z_bck = current_;
      }
      if (!valid) break;
      ++depth;
      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    Transition t;
    t.accept = n_leapfrog_ > 0 ? sum_metro_prob_ / n_leapfrog_ : 0.0;
    t.depth = depth;
    t.divergent = divergent_;
    z = z_sample;
    return t;
  }

  /// Doubles or halves the step until the one-step acceptance crosses 0.8.
  void init_step(const PhasePoint& start) {
    PhasePoint z = start;
    sample_momentum(z);
    double H0 = hamiltonian(z);
    leapfrog(z, step);
    double delta_H = H0 - hamiltonian(z);
    const int direction = delta_H > std::log(0.8) ? 1 : -1;
    for (int it = 0; it < 100; ++it) {
      z = start;
      sample_momentum(z);
      H0 = hamiltonian(z);
      leapfrog(z, step);
      const double h = hamiltonian(z);
      delta_H = H0 - (std::isnan(h) ? kInf : h);
      if (direction == 1 && !(delta_H > std::log(0.8))) break;
      if (direction == -1 && !(delta_H < std::log(0.8))) break;
      step = direction == 1 ? 2.0 * step : 0.5 * step;
      if (step > 1e7) throw ConvergenceError("step size diverged during initialisation; the posterior may be improper");
      if (step == 0.0) throw ConvergenceError("step size collapsed to zero during initialisation");
    }
  }

 private:
  Eigen::VectorXd sharp(const Eigen::VectorXd& p) const { return metric_.sharp(p); }

  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  void sample_momentum(PhasePoint& z) {
    z.p.resize(z.q.size());
    if (metric_.dense) {
      // p ~ N(0, full^{-1}) via p = L^{-T} u.
      Eigen::VectorXd u(z.q.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal_(rng_);
      z.p = metric_.chol.transpose().triangularView<Eigen::Upper>().solve(u);
    } else {
      for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal_(rng_) / std::sqrt(metric_.diag[i]);
    }
  }

  double hamiltonian(const PhasePoint& z) const {
    return -z.logp + 0.5 * z.p.dot(sharp(z.p));
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * sharp(z.p);
    evaluate(z);
    if (std::isfinite(z.logp)) {
      z.p += 0.5 * eps * z.grad;
    } else {
      z.grad = Eigen::VectorXd::Zero(z.q.size());
    }
  }

  bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double H0, double sign,
                  double& log_sum_weight) {
    if (depth == 0) {
      leapfrog(current_, sign * step);
      ++n_leapfrog_;
      double h = hamiltonian(current_);
      if (std::isnan(h)) h = kInf;
      if (h - H0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
      sum_metro_prob_ += H0 - h > 0.0 ? 1.0 : std::exp(H0 - h);
      z_propose = current_;
      p_sharp_beg = sharp(current_.p);
      p_sharp_end = p_sharp_beg;
      rho += current_.p;
      p_beg = current_.p;
      p_end = p_beg;
      return !divergent_;
    }
    const Eigen::Index n = current_.q.size();
    double log_sum_weight_init = -kInf;
    Eigen::VectorXd p_init_end(n), p_sharp_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, H0, sign,
                    log_sum_weight_init)) {
      return false;
    }
    PhasePoint z_propose_final = current_;
    double log_sum_weight_final = -kInf;
    Eigen::VectorXd p_final_beg(n), p_sharp_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, H0,
                    sign, log_sum_weight_final)) {
      return false;
    }
    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }
    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  const LogDensity& density_;
  Metric metric_;
  int max_depth_;
  Rng& rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  PhasePoint current_;
  int n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

struct ChainOutput {
  Eigen::MatrixXd theta;  // sampling x dim
  Eigen::VectorXd logp;
  std::vector<char> divergent;
  std::vector<int> depth;
  double step = 0.0;
};

ChainOutput run_chain(const LogDensity& density, const SamplerConfig& cfg, int chain,
                      const std::optional<Eigen::VectorXd>& init) {
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(chain) + 1);
  const Eigen::Index dim = density.dim();
  Nuts nuts(density, Metric::identity(dim, cfg.metric == MetricKind::dense), cfg.max_tree_depth, rng);

  PhasePoint z;
  if (init) {
    if (init->size() != dim) throw ConfigError("initial value has the wrong length");
    z.q = *init;
    nuts.evaluate(z);
    if (!std::isfinite(z.logp)) throw ConfigError("log density is not finite at the supplied initial value");
  } else {
    std::uniform_real_distribution<double> u(-cfg.init_radius, cfg.init_radius);
    for (int attempt = 0; attempt < 100 && !std::isfinite(z.logp); ++attempt) {
      z.q.resize(dim);
      for (Eigen::Index i = 0; i < dim; ++i) z.q[i] = u(rng);
      nuts.evaluate(z);
    }
    if (!std::isfinite(z.logp)) throw ConvergenceError("no finite initial value after 100 attempts");
  }

  nuts.step = 1.0;
  nuts.init_step(z);
  DualAveraging adapt(cfg.target_accept);
  adapt.restart(nuts.step);
  MetricWindows windows(cfg.warmup, dim);
  for (int it = 0; it < cfg.warmup; ++it) {
    const auto t = nuts.transition(z);
    nuts.step = adapt.learn(t.accept);
    if (windows.learn(z.q, nuts.metric())) {
      nuts.init_step(z);
      adapt.restart(nuts.step);
    }
  }
  if (cfg.warmup > 0) nuts.step = adapt.final_step();

  ChainOutput out;
  out.theta.resize(cfg.sampling, dim);
  out.logp.resize(cfg.sampling);
  out.divergent.resize(static_cast<std::size_t>(cfg.sampling));
  out.depth.resize(static_cast<std::size_t>(cfg.sampling));
  for (int it = 0; it < cfg.sampling; ++it) {
    const auto t = nuts.transition(z);
    out.theta.row(it) = z.q.transpose();
    out.logp[it] = z.logp;
    out.divergent[static_cast<std::size_t>(it)] = t.divergent ? 1 : 0;
    out.depth[static_cast<std::size_t>(it)] = t.depth;
  }
  out.step = nuts.step;
  return out;
}

using OutputFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

SampleResult run(const LogDensity& density, const SamplerConfig& cfg, const std::optional<Eigen::VectorXd>& init,
                 std::vector<std::string> parameter_names, std::vector<std::string> output_names,
                 const OutputFn& outputs, const OutputFn& pointwise) {
  cfg.validate();
  const int threads = std::min(resolve_threads(cfg.threads), cfg.chains);
  std::vector<ChainOutput> chains(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  auto worker = [&](int first) {
    for (int c = first; c < cfg.chains; c += threads) {
      try {
        chains[static_cast<std::size_t>(c)] = run_chain(density, cfg, c, init);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SampleResult result;
  auto& d = result.draws;
  d.chains = cfg.chains;
  d.iterations = cfg.sampling;
  d.parameter_names = std::move(parameter_names);
  d.output_names = std::move(output_names);
  const Eigen::Index total = static_cast<Eigen::Index>(cfg.chains) * cfg.sampling;
  d.unconstrained.resize(total, density.dim());
  d.log_density.resize(total);
  for (int c = 0; c < cfg.chains; ++c) {
    const auto& ch = chains[static_cast<std::size_t>(c)];
    const Eigen::Index offset = static_cast<Eigen::Index>(c) * cfg.sampling;
    d.unconstrained.middleRows(offset, cfg.sampling) = ch.theta;
    d.log_density.segment(offset, cfg.sampling) = ch.logp;
    d.divergent.insert(d.divergent.end(), ch.divergent.begin(), ch.divergent.end());
    d.tree_depth.insert(d.tree_depth.end(), ch.depth.begin(), ch.depth.end());
    d.step_size.push_back(ch.step);
  }
  d.outputs.resize(total, static_cast<Eigen::Index>(d.output_names.size()));
  for (Eigen::Index i = 0; i < total; ++i) d.outputs.row(i) = outputs(d.unconstrained.row(i).transpose()).transpose();
  if (cfg.store_pointwise && pointwise) {
    for (Eigen::Index i = 0; i < total; ++i) {
      const Eigen::VectorXd ll = pointwise(d.unconstrained.row(i).transpose());
      if (i == 0) d.pointwise_loglik.resize(total, ll.size());
      d.pointwise_loglik.row(i) = ll.transpose();
    }
  }
  if (cfg.chains >= 2 && cfg.sampling >= 4) {
    result.diagnostics = rhat_ess(d);
  } else {
    result.diagnostics.names = d.output_names;
    result.diagnostics.rhat = Eigen::VectorXd::Constant(d.outputs.cols(), std::numeric_limits<double>::quiet_NaN());
    result.diagnostics.ess_bulk = result.diagnostics.rhat;
    result.diagnostics.divergences = d.divergences();
  }
  spdlog::debug("sampled {} chains x {} draws, {} divergent, max R-hat {:.4f}", cfg.chains, cfg.sampling,
                d.divergences(), result.diagnostics.max_rhat());
  return result;
}

std::vector<std::string> coordinate_names(Eigen::Index dim) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < dim; ++i) names.push_back("theta[" + std::to_string(i + 1) + "]");
  return names;
}

}  // namespace

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BRC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError(std::string("BRC_THREADS must be a positive integer, got '") + env + "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

SampleResult sample(const Model& model, const SamplerConfig& cfg, const std::optional<Eigen::VectorXd>& init) {
  return run(model, cfg, init, model.layout().scalar_names(), model.output_names(),
             [&](const Eigen::VectorXd& th) { return model.outputs(th); },
             [&](const Eigen::VectorXd& th) { return model.pointwise_loglik(th); });
}

SampleResult sample(const LogDensity& density, const SamplerConfig& cfg, const std::optional<Eigen::VectorXd>& init) {
  auto names = coordinate_names(density.dim());
  return run(density, cfg, init, names, names, [](const Eigen::VectorXd& th) { return th; }, OutputFn{});
}

}  // namespace brc
