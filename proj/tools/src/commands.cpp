#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "brc/csv.hpp"
#include "brc/error.hpp"
#include "brc/evaluation.hpp"
#include "brc/pipeline.hpp"
#include "brc/rng.hpp"
#include "brc/selection.hpp"
#include "dataset.hpp"

namespace brc::cli {

namespace {

namespace fs = std::filesystem;

class Stage {
 public:
  explicit Stage(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {
    spdlog::info("{}: start", name_);
  }
  ~Stage() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    spdlog::info("{}: done in {:.2f} s", name_, dt.count());
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

template <class F>
void write_output(const fs::path& path, F&& body) {
  std::ostringstream os;
  body(os);
  write_file_atomic(path, os.str());
}

fs::path prepare_out(const RunConfig& rc) {
  const auto out = rc.out();
  fs::create_directories(out);
  return out;
}

/// Tracks the worst R-hat over every fit of a command.
struct ConvergenceCheck {
  double worst = 0.0;

  void add(const Diagnostics& d) {
    const double r = d.max_rhat();
    if (std::isfinite(r) && r > worst) worst = r;
  }
  void enforce(bool strict) const {
    if (worst >= 1.05) {
      spdlog::warn("max R-hat {:.3f} >= 1.05", worst);
      if (strict) throw ConvergenceError("max R-hat " + format_double(worst) + " >= 1.05");
    }
  }
};

bool is_brc(const ModelSpec& spec) { return spec.family == ModelFamily::aggregated_brc; }

std::unique_ptr<Model> build_model(const ModelSpec& spec, const Dataset& d) {
  if (is_brc(spec)) {
    const auto data = BrcData::from_records(d.records, CoarseBandSet::contact_default(), PopulationTable{});
    return make_model(spec, data);
  }
  return make_model(spec, d.data);
}

void write_theta(std::ostream& out, const PosteriorDraws& draws) {
  std::vector<std::string> header = {"chain", "iteration"};
  header.insert(header.end(), draws.parameter_names.begin(), draws.parameter_names.end());
  out << csv::join(header) << '\n';
  for (Eigen::Index i = 0; i < draws.unconstrained.rows(); ++i) {
    out << (i / draws.iterations + 1) << ',' << (i % draws.iterations + 1);
    for (Eigen::Index j = 0; j < draws.unconstrained.cols(); ++j) out << ',' << format_double(draws.unconstrained(i, j));
    out << '\n';
  }
}

Eigen::MatrixXd read_theta(const fs::path& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!csv::read_line(in, line, line_no)) throw DataError("empty draws file " + path.string());
  const auto header = csv::split_line(line);
  if (header.size() != names.size() + 2) throw DataError("draws file does not match the model dimension", line_no);
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (header[j + 2] != names[j]) throw DataError("draws column '" + header[j + 2] + "' is not " + names[j], line_no);
  }
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (csv::read_line(in, line, line_no)) {
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) throw DataError("wrong number of fields", line_no);
    for (std::size_t j = 2; j < fields.size(); ++j) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(fields[j], &used));
        if (used != fields[j].size()) throw std::invalid_argument(fields[j]);
      } catch (const std::exception&) {
        throw DataError("not a number: '" + fields[j] + "'", line_no);
      }
    }
    ++rows;
  }
  if (rows == 0) throw DataError("no draws in " + path.string());
  const auto cols = static_cast<Eigen::Index>(names.size());
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, cols);
}

FlatConfig with_prefix(const FlatConfig& c, const std::string& prefix) {
  FlatConfig out;
  for (const auto& [k, v] : c.entries()) out.set(prefix + k, v);
  return out;
}

void merge_into(FlatConfig& target, const FlatConfig& source) {
  for (const auto& [k, v] : source.entries()) target.set(k, v);
}

StratumShares load_shares(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  StratumShares shares;
  std::string line;
  std::size_t line_no = 0;
  if (!csv::read_line(in, line, line_no)) throw DataError("empty shares file " + path.string());
  const auto header = csv::split_line(line);
  if (header.size() != 2 || header[0] != "stratum" || header[1] != "share") {
    throw DataError("shares header must be stratum,share", line_no);
  }
  while (csv::read_line(in, line, line_no)) {
    const auto f = csv::split_line(line);
    if (f.size() != 2) throw DataError("wrong number of fields", line_no);
    try {
      shares[f[0]] = std::stod(f[1]);
    } catch (const std::exception&) {
      throw DataError("not a number: '" + f[1] + "'", line_no);
    }
  }
  return shares;
}

std::vector<SurveyRecord> take_records(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  std::vector<SurveyRecord> out;
  out.reserve(rows.size());
  for (auto i : rows) out.push_back(d.records[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Eigen::Index> thin(Eigen::Index total, Eigen::Index keep) {
  std::vector<Eigen::Index> idx;
  if (keep >= total) {
    for (Eigen::Index i = 0; i < total; ++i) idx.push_back(i);
    return idx;
  }
  for (Eigen::Index i = 0; i < keep; ++i) idx.push_back(i * total / keep);
  return idx;
}

}  // namespace

// --------------------------------------------------------------------------

void run_simulate(const RunConfig& rc) {
  const auto scenario = rc.scenario();
  const auto out = prepare_out(rc);
  SimulationResult sim;
  {
    Stage s("simulate " + scenario.name);
    sim = simulate_panel(scenario);
  }
  Stage s("write");
  write_simulation(out, sim, scenario);
  spdlog::info("{} records written to {}", sim.records.size(), out.string());
}

void run_fit(const RunConfig& rc) {
  const auto data_path = fs::absolute(rc.input("data")).lexically_normal();
  const auto spec = rc.model("gam-hill");
  const auto sampler = rc.sampler();
  const auto out = prepare_out(rc);

  Dataset d;
  {
    Stage s("load");
    d = load_dataset(data_path, rc.settings, spec.fatigue.kind == FatigueKind::hill_per_covariate);
  }
  std::unique_ptr<Model> model;
  {
    Stage s("build model");
    model = build_model(spec, d);
  }
  SampleResult fit;
  {
    Stage s("sample");
    fit = sample(*model, sampler);
  }
  Stage s("write");
  write_output(out / "draws.csv", [&](std::ostream& os) { fit.draws.write_csv(os); });
  write_output(out / "theta.csv", [&](std::ostream& os) { write_theta(os, fit.draws); });
  write_output(out / "summary.csv",
               [&](std::ostream& os) { write_summary_csv(os, summarize(fit.draws), &fit.diagnostics); });

  FlatConfig manifest;
  manifest.set("data", data_path.string());
  merge_into(manifest, d.resolved);
  merge_into(manifest, with_prefix(spec.to_config(), "model."));
  merge_into(manifest, with_prefix(sampler_to_config(sampler), "sampler."));
  manifest.set("fit.seed", std::to_string(sampler.seed));
  manifest.set("fit.observations", static_cast<long long>(model->observations()));
  manifest.set("fit.draws", static_cast<long long>(fit.draws.draws()));
  manifest.set("fit.max_rhat", fit.diagnostics.max_rhat());
  manifest.set("fit.min_ess", fit.diagnostics.min_ess());
  manifest.set("fit.divergences", static_cast<long long>(fit.diagnostics.divergences));
  write_file_atomic(out / "fit.manifest", manifest.to_string());

  spdlog::info("max R-hat {:.3f}, min bulk ESS {:.0f}, divergences {}", fit.diagnostics.max_rhat(),
               fit.diagnostics.min_ess(), fit.diagnostics.divergences);
  ConvergenceCheck check;
  check.add(fit.diagnostics);
  check.enforce(rc.strict);
}

void run_select(const RunConfig& rc) {
  const auto data_path = rc.input("data");
  const auto spec = rc.model("stage1");
  const auto sampler = rc.sampler();
  const auto sel = rc.section("select.");
  sel.reject_unknown({"lower", "upper", "stage2"});
  SelectionThresholds th;
  th.lower = sel.get_double("lower", th.lower);
  th.upper = sel.get_double("upper", th.upper);
  th.stage2 = sel.get_double("stage2", th.stage2);
  if (!(th.lower < th.upper)) throw ConfigError("select.lower must be below select.upper");
  const auto out = prepare_out(rc);

  Dataset d;
  {
    Stage s("load");
    d = load_dataset(data_path, rc.settings, true);
  }
  ConvergenceCheck check;
  std::vector<SelectionResult> stage1, stage2;
  for (int wave : waves_of(d)) {
    const auto first = rows_where(d, [&](const SurveyRecord& r) { return r.wave == wave && r.repeat == 0; });
    const auto repeat = rows_where(d, [&](const SurveyRecord& r) { return r.wave == wave && r.repeat > 0; });
    if (first.empty()) {
      spdlog::warn("wave {} has no first-time participants; skipped", wave);
      continue;
    }
    SamplerConfig cfg = sampler;
    cfg.seed = sampler.seed + 7919 * static_cast<std::uint64_t>(wave);
    const auto first_data = d.data.subset(first);
    Stage s("select wave " + std::to_string(wave));
    auto r1 = stage1_select(first_data, spec.rhs, cfg, th);
    check.add(r1.diagnostics);
    write_output(out / ("stage1_wave" + std::to_string(wave) + ".csv"), [&](std::ostream& os) { r1.write_csv(os); });
    if (!repeat.empty() && d.data.fatigue_names.size() > 0 && d.features.find("w")) {
      const auto medians = refit_stage1(first_data, r1.selected_names(), cfg);
      auto r2 = stage2_select(d.data.subset(repeat), medians, spec.rhs, cfg, th);
      check.add(r2.diagnostics);
      write_output(out / ("stage2_wave" + std::to_string(wave) + ".csv"), [&](std::ostream& os) { r2.write_csv(os); });
      stage2.push_back(std::move(r2));
    }
    stage1.push_back(std::move(r1));
  }
  if (stage1.empty()) throw DataError("no wave has first-time participants");
  write_output(out / "selected.csv", [&](std::ostream& os) {
    os << "stage,feature\n";
    for (const auto& n : union_across_waves(stage1)) os << "1," << csv::escape(n) << '\n';
    for (const auto& n : union_across_waves(stage2)) os << "2," << csv::escape(n) << '\n';
  });
  check.enforce(rc.strict);
}

void run_debias_sequence(const RunConfig& rc) {
  const auto data_path = rc.input("data");
  const auto spec = rc.model("gam-hill");
  const auto seq_cfg = rc.section("sequence.");
  seq_cfg.reject_unknown({"propagation", "beta_sd", "gamma_sd", "zeta_sd", "eta_sd", "bootstrap", "shares",
                          "unadjusted", "firsttime"});
  SequenceConfig seq;
  seq.sampler = rc.sampler();
  const auto prop = seq_cfg.get_string("propagation", "mean");
  if (prop != "mean" && prop != "median") throw ConfigError("sequence.propagation must be mean or median");
  seq.propagation = prop == "mean" ? Propagation::mean : Propagation::median;
  seq.beta_sd = seq_cfg.get_double("beta_sd", seq.beta_sd);
  seq.gamma_sd = seq_cfg.get_double("gamma_sd", seq.gamma_sd);
  seq.zeta_sd = seq_cfg.get_double("zeta_sd", seq.zeta_sd);
  seq.eta_sd = seq_cfg.get_double("eta_sd", seq.eta_sd);
  const int resamples = static_cast<int>(seq_cfg.get_int("bootstrap", 1000));
  const bool with_unadjusted = seq_cfg.get_bool("unadjusted", true);
  const bool with_firsttime = seq_cfg.get_bool("firsttime", true);
  StratumShares shares;
  if (seq_cfg.has("shares")) {
    const fs::path p = seq_cfg.require("shares");
    if (!fs::is_regular_file(p)) throw ConfigError("shares file not found: " + p.string());
    shares = load_shares(p);
  }
  const auto out = prepare_out(rc);

  Dataset d;
  {
    Stage s("load");
    d = load_dataset(data_path, rc.settings, spec.fatigue.kind == FatigueKind::hill_per_covariate);
  }
  std::vector<WaveData> waves;
  std::map<int, std::vector<Eigen::Index>> wave_rows;
  for (int w : waves_of(d)) {
    wave_rows[w] = rows_where(d, [&](const SurveyRecord& r) { return r.wave == w; });
    waves.push_back({w, d.data.subset(wave_rows[w])});
  }
  auto free_spec = spec;
  free_spec.fatigue.kind = FatigueKind::none;
  free_spec.priors.erase("hill_gamma");
  free_spec.priors.erase("hill_zeta");
  free_spec.priors.erase("hill_eta");

  ConvergenceCheck check;
  std::vector<WaveFit> fits;
  {
    Stage s("sequential fits");
    fits = fit_sequence(waves, spec, seq);
  }
  std::map<int, WaveFit> unadjusted, firsttime;
  if (with_unadjusted) {
    Stage s("unadjusted fits");
    for (auto& f : fit_independent(waves, free_spec, seq.sampler)) unadjusted.emplace(f.wave, std::move(f));
  }
  if (with_firsttime) {
    Stage s("first-time fits");
    std::vector<WaveData> first;
    for (const auto& w : waves) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < w.data.rows(); ++i) {
        if (w.data.repeat[i] == 0) rows.push_back(i);
      }
      if (rows.empty()) {
        spdlog::warn("wave {} has no first-time participants", w.wave);
        continue;
      }
      first.push_back({w.wave, w.data.subset(rows)});
    }
    for (auto& f : fit_independent(first, free_spec, seq.sampler)) firsttime.emplace(f.wave, std::move(f));
  }

  Stage s("estimates");
  std::vector<PopulationEstimate> estimates;
  for (const auto& w : waves) {
    const auto records = take_records(d, wave_rows[w.wave]);
    const auto weights = stratum_weights(records, shares);
    for (const auto& f : fits) {
      if (f.wave != w.wave) continue;
      check.add(f.diagnostics);
      estimates.push_back(poststratified_mean(f, w.data, weights, true));
    }
    if (auto it = unadjusted.find(w.wave); it != unadjusted.end()) {
      check.add(it->second.diagnostics);
      estimates.push_back(poststratified_mean(it->second, w.data, weights, false));
    }
    if (auto it = firsttime.find(w.wave); it != firsttime.end()) {
      check.add(it->second.diagnostics);
      auto e = poststratified_mean(it->second, w.data, weights, false);
      e.method = EstimateMethod::bayes_firsttime;
      estimates.push_back(e);
    }
    estimates.push_back(bootstrap_mean(records, resamples, weights, seq.sampler.seed + static_cast<std::uint64_t>(w.wave), w.wave));
  }
  write_output(out / "estimates.csv", [&](std::ostream& os) { write_estimates_csv(os, estimates); });
  write_output(out / "wave_fits.csv", [&](std::ostream& os) {
    os << "wave,provenance,parameter,mean,median,max_rhat,divergences\n";
    for (const auto& f : fits) {
      const char* prov = f.provenance == PriorProvenance::initial ? "initial" : "propagated";
      for (const auto& [name, mean] : f.posterior_mean) {
        const auto& median = f.posterior_median.at(name);
        for (Eigen::Index k = 0; k < mean.size(); ++k) {
          const std::string param = mean.size() == 1 ? name : name + "[" + std::to_string(k + 1) + "]";
          os << csv::join({std::to_string(f.wave), prov, param, format_double(mean[k]), format_double(median[k]),
                           format_double(f.diagnostics.max_rhat()), std::to_string(f.diagnostics.divergences)})
             << '\n';
        }
      }
    }
  });
  check.enforce(rc.strict);
}

void run_study(const RunConfig& rc) {
  const auto data_path = rc.input("data");
  const auto adjusted = rc.model("gam-hill");
  const auto st = rc.section("study.");
  st.reject_unknown({"wave", "caps", "ages"});
  StudyConfig cfg;
  cfg.sampler = rc.sampler();
  const auto out = prepare_out(rc);

  Dataset d;
  {
    Stage s("load");
    d = load_dataset(data_path, rc.settings, adjusted.fatigue.kind == FatigueKind::hill_per_covariate);
  }
  const auto all_waves = waves_of(d);
  const int wave = static_cast<int>(st.get_int("wave", all_waves.back()));
  const auto rows = rows_where(d, [&](const SurveyRecord& r) { return r.wave == wave; });
  if (rows.empty()) throw DataError("wave " + std::to_string(wave) + " has no records");
  const auto data = d.data.subset(rows);
  auto parse_ints = [](const std::string& key, const std::string& text) {
    std::vector<int> v;
    for (const auto& item : split_list(text)) {
      try {
        v.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError(key + ": '" + item + "' is not an integer");
      }
    }
    return v;
  };
  if (st.has("caps")) {
    cfg.caps = parse_ints("study.caps", st.require("caps"));
  } else {
    for (int c = 0; c <= data.repeat.maxCoeff(); ++c) cfg.caps.push_back(c);
  }
  if (st.has("ages")) {
    for (int a : parse_ints("study.ages", st.require("ages"))) cfg.ages.push_back(a);
  }
  auto unadjusted = adjusted;
  unadjusted.fatigue.kind = FatigueKind::none;
  unadjusted.priors.erase("hill_gamma");
  unadjusted.priors.erase("hill_zeta");
  unadjusted.priors.erase("hill_eta");

  std::vector<StudyRow> study;
  {
    Stage s("study wave " + std::to_string(wave));
    study = incremental_inclusion_study(data, adjusted, unadjusted, cfg);
  }
  write_output(out / "study.csv", [&](std::ostream& os) { write_study_csv(os, study); });
}

void run_evaluate(const RunConfig& rc) {
  const auto fit_dir = rc.input("fit");
  const auto manifest_path = fit_dir / "fit.manifest";
  if (!fs::is_regular_file(manifest_path)) throw ConfigError("no fit.manifest in " + fit_dir.string());
  const auto manifest = FlatConfig::load(manifest_path);
  const fs::path data_path = rc.settings.has("data") ? rc.input("data") : fs::path(manifest.require("data"));
  if (!fs::exists(data_path)) throw ConfigError("data path not found: " + data_path.string());
  const auto truth_path = rc.optional_input("truth");
  const auto ev = rc.section("evaluate.");
  ev.reject_unknown({"max_draws", "ppc_lower", "ppc_upper"});
  const auto max_draws = ev.get_int("max_draws", 1000);
  if (max_draws < 100) throw ConfigError("evaluate.max_draws must be >= 100");
  const double ppc_lower = ev.get_double("ppc_lower", 0.025);
  const double ppc_upper = ev.get_double("ppc_upper", 0.975);
  const auto out = prepare_out(rc);

  const auto spec = ModelSpec::from_config(section_of(manifest, "model."));
  Dataset d;
  {
    Stage s("load");
    d = load_dataset(data_path, manifest, false);
  }
  const auto model = build_model(spec, d);
  Eigen::MatrixXd theta;
  {
    Stage s("read draws");
    theta = read_theta(fit_dir / "theta.csv", model->layout().scalar_names());
  }
  const auto keep = thin(theta.rows(), max_draws);
  const auto S = static_cast<Eigen::Index>(keep.size());
  const Eigen::Index n = model->observations();

  LooResult loo;
  {
    Stage s("loo");
    Eigen::MatrixXd loglik(S, n);
    for (Eigen::Index k = 0; k < S; ++k) loglik.row(k) = model->pointwise_loglik(theta.row(keep[k]).transpose()).transpose();
    loo = psis_loo(loglik);
  }
  const std::string name = to_string(spec.family) + "/" + to_string(spec.fatigue.kind);
  write_output(out / "loo.csv", [&](std::ostream& os) { write_loo_table(os, loo_compare({{name, loo}})); });
  write_output(out / "loo_pointwise.csv", [&](std::ostream& os) {
    os << "observation,elpd,pareto_k\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      os << (i + 1) << ',' << format_double(loo.pointwise[i]) << ',' << format_double(loo.pareto_k[i]) << '\n';
    }
  });
  std::vector<std::pair<std::string, double>> rows = {
      {"elpd_loo", loo.elpd}, {"elpd_loo_se", loo.elpd_se}, {"pareto_k_above_0.7", static_cast<double>(loo.flagged().size())}};

  const auto* im = dynamic_cast<const IndividualModel*>(model.get());
  if (im == nullptr) {
    spdlog::warn("predictive checks and truth comparison need an individual-level model; only LOO was computed");
    if (truth_path) throw ConfigError("--truth needs an individual-level model");
  } else {
    Stage s("predictive checks");
    const auto& data = im->data();
    Eigen::MatrixXd pred(S, n), rep(S, n);
    auto rng = make_rng(rc.seed(), 0x707063);
    const bool poisson = spec.observation == Observation::poisson;
    const bool has_phi = model->layout().has("phi");
    for (Eigen::Index k = 0; k < S; ++k) {
      const Eigen::VectorXd th = theta.row(keep[k]).transpose();
      pred.row(k) = im->predict_log_intensity(th, data, false).array().exp().transpose();
      const double phi = has_phi ? model->layout().constrain(th)[model->layout().block("phi").offset] : 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double mu = pred(k, i);
        if (!poisson && has_phi) mu = std::gamma_distribution<double>(phi, mu / phi)(rng);
        rep(k, i) = static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
      }
    }
    std::vector<double> observed(data.y.data(), data.y.data() + n);
    const auto ppc = mse_and_ppc(pred, rep, observed, ppc_lower, ppc_upper);
    rows.push_back({"mse", ppc.mse});
    rows.push_back({"ppc_flagged", static_cast<double>(ppc.ppc.flagged)});
    rows.push_back({"ppc_flagged_fraction", ppc.ppc.flagged_fraction});

    if (truth_path) {
      const auto truth = FlatConfig::load(*truth_path);
      struct Cell {
        int wave;
        std::string method;
        double truth, median, lower, upper;
      };
      std::vector<Cell> cells;
      for (const bool debias : {true, false}) {
        const std::string method = debias ? "debiased" : "fitted";
        std::vector<double> est, lo, hi, base;
        for (int w : waves_of(d)) {
          const std::string key = "truth.wave." + std::to_string(w) + ".mean_lambda_free";
          if (!truth.has(key)) throw DataError("truth manifest has no " + key);
          const auto wrows = rows_where(d, [&](const SurveyRecord& r) { return r.wave == w; });
          const auto sub = data.subset(wrows);
          std::vector<double> per_draw(static_cast<std::size_t>(S));
          for (Eigen::Index k = 0; k < S; ++k) {
            per_draw[static_cast<std::size_t>(k)] =
                im->predict_log_intensity(theta.row(keep[k]).transpose(), sub, debias).array().exp().mean();
          }
          Cell c{w, method, truth.require_double(key), quantile(per_draw, 0.5), quantile(per_draw, 0.025),
                 quantile(per_draw, 0.975)};
          est.push_back(c.median);
          lo.push_back(c.lower);
          hi.push_back(c.upper);
          base.push_back(c.truth);
          cells.push_back(c);
        }
        rows.push_back({"mape_" + method, mape(est, base)});
        rows.push_back({"coverage_" + method, interval_coverage(base, lo, hi)});
      }
      write_output(out / "truth_comparison.csv", [&](std::ostream& os) {
        os << "wave,method,truth,median,lower,upper\n";
        for (const auto& c : cells) {
          os << csv::join({std::to_string(c.wave), c.method, format_double(c.truth), format_double(c.median),
                           format_double(c.lower), format_double(c.upper)})
             << '\n';
        }
      });
    }
  }
  write_output(out / "metrics.csv", [&](std::ostream& os) {
    os << "metric,value\n";
    for (const auto& [k, v] : rows) os << k << ',' << format_double(v) << '\n';
  });
  for (const auto& [k, v] : rows) spdlog::info("{} = {}", k, format_double(v));
}

}  // namespace brc::cli
