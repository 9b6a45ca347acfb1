#include "brc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "brc/config.hpp"
#include "brc/csv.hpp"
#include "brc/error.hpp"
#include "brc/evaluation.hpp"

namespace brc {

namespace {

const char* const kSummaryBlocks[] = {"beta", "hill_gamma", "hill_zeta", "hill_eta"};

std::uint64_t wave_seed(std::uint64_t base, int wave) { return base + 7919ULL * static_cast<std::uint64_t>(wave); }

PopulationEstimate from_draws(const Eigen::VectorXd& values, int wave, EstimateMethod method) {
  static const double kProbs[] = {0.5, 0.025, 0.975};
  const Eigen::VectorXd q = quantiles(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), kProbs);
  PopulationEstimate e;
  e.wave = wave;
  e.method = method;
  e.median = q[0];
  e.lower = q[1];
  e.upper = q[2];
  return e;
}

}  // namespace

ModelSpec propagate_priors(const ModelSpec& base, const WaveFit& previous, const SequenceConfig& cfg) {
  ModelSpec spec = base;
  const auto& source = cfg.propagation == Propagation::mean ? previous.posterior_mean : previous.posterior_median;
  auto set = [&](const char* block, auto make) {
    auto it = source.find(block);
    if (it == source.end()) return;
    std::vector<PriorSpec> priors;
    for (Eigen::Index k = 0; k < it->second.size(); ++k) priors.push_back(make(it->second[k]));
    spec.priors[block] = std::move(priors);
  };
  set("beta", [&](double m) { return PriorSpec::normal(m, cfg.beta_sd); });
  set("hill_gamma", [&](double m) { return PriorSpec::half_normal_pos(m, cfg.gamma_sd); });
  set("hill_zeta", [&](double m) { return PriorSpec::normal(m, cfg.zeta_sd); });
  set("hill_eta", [&](double m) { return PriorSpec::half_normal_pos(m, cfg.eta_sd); });
  return spec;
}

WaveFit fit_wave(const WaveData& wave, const ModelSpec& spec, const SamplerConfig& cfg, PriorProvenance provenance) {
  WaveFit fit;
  fit.wave = wave.wave;
  fit.provenance = provenance;
  fit.spec = spec;
  auto model = std::make_shared<const IndividualModel>(spec, wave.data);
  auto result = sample(*model, cfg);
  const auto& layout = model->layout();
  const auto& draws = result.draws;
  for (const char* name : kSummaryBlocks) {
    if (!layout.has(name)) continue;
    const auto& b = layout.block(name);
    Eigen::VectorXd mean(b.size), median(b.size);
    for (Eigen::Index k = 0; k < b.size; ++k) {
      const Eigen::VectorXd col = draws.outputs.col(b.offset + k);
      mean[k] = col.mean();
      median[k] = quantile(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), 0.5);
    }
    fit.posterior_mean[name] = mean;
    fit.posterior_median[name] = median;
  }
  fit.diagnostics = result.diagnostics;
  const double rhat = fit.diagnostics.max_rhat();
  if (!std::isnan(rhat) && rhat >= 1.05) {
    fit.warnings.push_back("wave " + std::to_string(wave.wave) + ": max R-hat " + format_double(rhat));
  }
  if (fit.diagnostics.divergences > 0) {
    fit.warnings.push_back("wave " + std::to_string(wave.wave) + ": " + std::to_string(fit.diagnostics.divergences) +
                           " divergent transitions");
  }
  for (const auto& w : fit.warnings) spdlog::warn("{}", w);
  fit.model = std::move(model);
  fit.draws = std::make_shared<const PosteriorDraws>(std::move(result.draws));
  return fit;
}

std::vector<WaveFit> fit_sequence(std::span<const WaveData> waves, const ModelSpec& spec, const SequenceConfig& cfg) {
  if (spec.family != ModelFamily::individual_gam) throw ConfigError("sequential fitting needs a gam model");
  for (std::size_t i = 1; i < waves.size(); ++i) {
    if (waves[i].wave <= waves[i - 1].wave) throw ConfigError("waves must be in increasing order");
  }
  std::vector<WaveFit> out;
  for (const auto& w : waves) {
    if (w.data.rows() == 0) {
      spdlog::warn("wave {} has no records; skipped", w.wave);
      continue;
    }
    SamplerConfig sc = cfg.sampler;
    sc.seed = wave_seed(cfg.sampler.seed, w.wave);
    if (out.empty()) {
      out.push_back(fit_wave(w, spec, sc, PriorProvenance::initial));
    } else {
      out.push_back(fit_wave(w, propagate_priors(spec, out.back(), cfg), sc, PriorProvenance::propagated));
    }
  }
  return out;
}

std::vector<WaveFit> fit_independent(std::span<const WaveData> waves, const ModelSpec& spec,
                                     const SamplerConfig& cfg) {
  std::vector<WaveFit> out;
  for (const auto& w : waves) {
    if (w.data.rows() == 0) {
      spdlog::warn("wave {} has no records; skipped", w.wave);
      continue;
    }
    SamplerConfig sc = cfg;
    sc.seed = wave_seed(cfg.seed, w.wave);
    out.push_back(fit_wave(w, spec, sc, PriorProvenance::initial));
  }
  return out;
}

std::string to_string(EstimateMethod method) {
  switch (method) {
    case EstimateMethod::bayes_debiased: return "bayes-debiased";
    case EstimateMethod::bayes_unadjusted: return "bayes-unadjusted";
    case EstimateMethod::bayes_firsttime: return "bayes-firsttime";
    case EstimateMethod::bootstrap: return "bootstrap";
  }
  return "unknown";
}

std::string stratum_key(const SurveyRecord& record) {
  static const CoarseBandSet bands = CoarseBandSet::contact_default();
  const auto k = bands.index_of(std::clamp(record.age, 0, kMaxAge));
  if (!k) throw DataError("age " + std::to_string(record.age) + " outside the stratification bands");
  return bands[*k].label() + "|" + record.sex + "|" + record.household_size;
}

Eigen::VectorXd stratum_weights(std::span<const SurveyRecord> records, const StratumShares& shares) {
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n == 0) throw DataError("no records to weight");
  if (shares.empty()) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double total = 0.0;
  for (const auto& [key, share] : shares) {
    if (!(share >= 0.0)) throw DataError("negative population share for stratum '" + key + "'");
    total += share;
  }
  if (std::abs(total - 1.0) > 1e-6) throw DataError("population shares sum to " + format_double(total) + ", not 1");
  std::vector<std::string> keys;
  std::map<std::string, int> counts;
  for (const auto& r : records) {
    keys.push_back(stratum_key(r));
    ++counts[keys.back()];
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& key = keys[static_cast<std::size_t>(i)];
    auto it = shares.find(key);
    if (it == shares.end()) throw DataError("stratum '" + key + "' has no population share");
    w[i] = it->second / counts[key];
  }
  return w;
}

PopulationEstimate poststratified_mean(const WaveFit& fit, const IndividualData& strata,
                                       const Eigen::VectorXd& weights, bool debias) {
  if (!fit.model || !fit.draws) throw ConfigError("wave fit has no model or draws");
  if (weights.size() != strata.rows()) throw DataError("weights do not match the stratification rows");
  if (strata.rows() == 0) throw DataError("empty stratification grid");
  const double total = weights.sum();
  if (!(total > 0.0) || (weights.array() < 0.0).any()) throw DataError("weights must be non-negative with a positive sum");
  const Eigen::MatrixXd mu = predict_intensity(*fit.model, *fit.draws, strata, debias);
  const Eigen::VectorXd per_draw = mu * weights / total;
  return from_draws(per_draw, fit.wave, debias ? EstimateMethod::bayes_debiased : EstimateMethod::bayes_unadjusted);
}

PopulationEstimate bootstrap_mean(std::span<const SurveyRecord> records, int resamples,
                                  const Eigen::VectorXd& weights, std::uint64_t seed, int wave) {
  if (resamples < 100) throw ConfigError("bootstrap needs at least 100 resamples");
  if (records.empty()) throw DataError("no records to bootstrap");
  if (weights.size() != static_cast<Eigen::Index>(records.size())) throw DataError("weights do not match the records");
  // Participants are the resampling unit.
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> sum_wy, sum_w;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = index.try_emplace(records[i].participant_id, ids.size());
    if (fresh) {
      ids.push_back(records[i].participant_id);
      sum_wy.push_back(0.0);
      sum_w.push_back(0.0);
    }
    const double w = weights[static_cast<Eigen::Index>(i)];
    sum_wy[it->second] += w * records[i].contacts;
    sum_w[it->second] += w;
  }
  Rng rng = make_rng(seed, 0x626f6f74);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  Eigen::VectorXd means(resamples);
  for (int b = 0; b < resamples; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t j = pick(rng);
      num += sum_wy[j];
      den += sum_w[j];
    }
    means[b] = den > 0.0 ? num / den : 0.0;
  }
  return from_draws(means, wave, EstimateMethod::bootstrap);
}

void write_estimates_csv(std::ostream& out, std::span<const PopulationEstimate> estimates) {
  out << "wave,method,median,lower,upper\n";
  for (const auto& e : estimates) {
    out << csv::join({std::to_string(e.wave), to_string(e.method), format_double(e.median), format_double(e.lower),
                      format_double(e.upper)})
        << '\n';
  }
}

AgeCurve age_curve(const IndividualModel& model, const PosteriorDraws& draws, std::span<const double> ages) {
  if (ages.empty()) throw ConfigError("age curve needs at least one age");
  const Eigen::Index S = draws.draws(), A = static_cast<Eigen::Index>(ages.size());
  if (S < 1) throw DataError("no posterior draws");
  const bool has_intercept = model.layout().has("beta0");
  const Eigen::Index b0 = has_intercept ? model.layout().block("beta0").offset : 0;
  Eigen::MatrixXd values(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::VectorXd theta = draws.unconstrained.row(s).transpose();
    const double intercept = has_intercept ? draws.outputs(s, b0) : 0.0;
    values.row(s) = (model.age_effect(theta, ages).array() + intercept).exp().transpose();
  }
  static const double kProbs[] = {0.5, 0.025, 0.975};
  AgeCurve curve;
  curve.ages.assign(ages.begin(), ages.end());
  for (Eigen::Index a = 0; a < A; ++a) {
    const Eigen::VectorXd col = values.col(a);
    const Eigen::VectorXd q = quantiles(std::span<const double>(col.data(), static_cast<std::size_t>(S)), kProbs);
    curve.median.push_back(q[0]);
    curve.lower.push_back(q[1]);
    curve.upper.push_back(q[2]);
  }
  return curve;
}

std::vector<StudyRow> incremental_inclusion_study(const IndividualData& wave, const ModelSpec& adjusted,
                                                  const ModelSpec& unadjusted, const StudyConfig& cfg) {
  if (cfg.caps.empty()) throw ConfigError("study needs at least one repeat cap");
  for (int c : cfg.caps) {
    if (c < 0) throw ConfigError("repeat caps must be >= 0");
  }
  std::vector<double> ages = cfg.ages;
  if (ages.empty()) {
    for (int a = 0; a < kAgeCount; ++a) ages.push_back(a);
  }
  auto rows_up_to = [&](int cap) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < wave.rows(); ++i) {
      if (wave.repeat[i] <= cap) rows.push_back(i);
    }
    return rows;
  };
  const auto first = rows_up_to(0);
  if (first.empty()) throw DataError("study data has no first-time participants");

  auto fit_curve = [&](const ModelSpec& spec, const IndividualData& data) {
    const IndividualModel model(spec, data);
    const auto fit = sample(model, cfg.sampler);
    return age_curve(model, fit.draws, ages);
  };
  const AgeCurve baseline = fit_curve(unadjusted, wave.subset(first));

  std::vector<StudyRow> out;
  for (int cap : cfg.caps) {
    const IndividualData data = wave.subset(rows_up_to(cap));
    const AgeCurve adj = fit_curve(adjusted, data);
    const AgeCurve raw = fit_curve(unadjusted, data);
    StudyRow row;
    row.cap = cap;
    row.mape_adjusted = mape(adj.median, baseline.median);
    row.coverage_adjusted = interval_coverage(baseline.median, adj.lower, adj.upper);
    row.mape_unadjusted = mape(raw.median, baseline.median);
    row.coverage_unadjusted = interval_coverage(baseline.median, raw.lower, raw.upper);
    spdlog::info("cap {}: MAPE adjusted {:.2f}%, unadjusted {:.2f}%", cap, row.mape_adjusted, row.mape_unadjusted);
    out.push_back(row);
  }
  return out;
}

void write_study_csv(std::ostream& out, std::span<const StudyRow> rows) {
  out << "cap,mape_adjusted,coverage_adjusted,mape_unadjusted,coverage_unadjusted\n";
  for (const auto& r : rows) {
    out << csv::join({std::to_string(r.cap), format_double(r.mape_adjusted), format_double(r.coverage_adjusted),
                      format_double(r.mape_unadjusted), format_double(r.coverage_unadjusted)})
        << '\n';
  }
}

}  // namespace brc
