#include "brc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "brc/config.hpp"
#include "brc/csv.hpp"
#include "brc/error.hpp"

namespace brc {

SelectionThresholds::SelectionThresholds()
    : lower(std::log(0.95)), upper(std::log(1.05)), stage2(std::log(0.95)) {}

bool stage1_selected(double median, const SelectionThresholds& t) { return median <= t.lower || median >= t.upper; }

bool stage2_selected(double median, const SelectionThresholds& t) { return median < t.stage2; }

std::vector<std::string> SelectionResult::selected_names() const {
  std::vector<std::string> out;
  for (const auto& f : features) {
    if (f.selected) out.push_back(f.name);
  }
  return out;
}

void SelectionResult::write_csv(std::ostream& out) const {
  out << "feature,median,lower50,upper50,selected\n";
  for (const auto& f : features) {
    out << csv::join({f.name, format_double(f.median), format_double(f.lower50), format_double(f.upper50),
                      f.selected ? "1" : "0"})
        << '\n';
  }
}

namespace {

std::vector<FeatureSelection> summarize_coefficients(const PosteriorDraws& draws, const std::string& prefix,
                                                     const std::vector<std::string>& names) {
  static const double kProbs[] = {0.25, 0.5, 0.75};
  std::vector<FeatureSelection> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Eigen::VectorXd col = draws.output(prefix + "[" + std::to_string(k + 1) + "]");
    const Eigen::VectorXd q = quantiles(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), kProbs);
    FeatureSelection f;
    f.name = names[k];
    f.lower50 = q[0];
    f.median = q[1];
    f.upper50 = q[2];
    out.push_back(f);
  }
  return out;
}

double median_of(const PosteriorDraws& draws, const std::string& name) {
  const Eigen::VectorXd col = draws.output(name);
  return quantile(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), 0.5);
}

}  // namespace

SelectionResult stage1_select(const IndividualData& first_timers, const RhsSpec& rhs, const SamplerConfig& cfg,
                              const SelectionThresholds& thresholds) {
  if (first_timers.tested.cols() < 1) throw ConfigError("stage-1 selection needs at least one tested feature");
  if (first_timers.rows() < 1) throw DataError("stage-1 selection has no first-time participants");
  ModelSpec spec = ModelSpec::preset("stage1");
  spec.rhs = rhs;
  spec.rhs.sign = RhsSign::unconstrained;
  const IndividualModel model(spec, first_timers);
  const auto fit = sample(model, cfg);

  SelectionResult result;
  result.stage = 1;
  result.threshold_lower = thresholds.lower;
  result.threshold_upper = thresholds.upper;
  result.diagnostics = fit.diagnostics;
  result.features = summarize_coefficients(fit.draws, "beta", first_timers.tested_names);
  for (auto& f : result.features) f.selected = stage1_selected(f.median, thresholds);
  return result;
}

Stage1Medians refit_stage1(const IndividualData& first_timers, const std::vector<std::string>& selected,
                           const SamplerConfig& cfg) {
  std::vector<Eigen::Index> keep;
  for (const auto& name : selected) {
    auto it = std::find(first_timers.tested_names.begin(), first_timers.tested_names.end(), name);
    if (it == first_timers.tested_names.end()) throw ConfigError("unknown tested feature '" + name + "'");
    keep.push_back(static_cast<Eigen::Index>(it - first_timers.tested_names.begin()));
  }
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  IndividualData data = first_timers;
  data.tested.resize(first_timers.rows(), static_cast<Eigen::Index>(keep.size()));
  data.tested_names.clear();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    data.tested.col(static_cast<Eigen::Index>(j)) = first_timers.tested.col(keep[j]);
    data.tested_names.push_back(first_timers.tested_names[static_cast<std::size_t>(keep[j])]);
  }
  const IndividualModel model(ModelSpec::preset("stage1-refit"), data);
  const auto fit = sample(model, cfg);

  Stage1Medians out;
  out.intercept = median_of(fit.draws, "beta0");
  out.baseline = Eigen::VectorXd::Zero(first_timers.baseline.cols());
  for (Eigen::Index k = 0; k < out.baseline.size(); ++k) {
    out.baseline[k] = median_of(fit.draws, "alpha[" + std::to_string(k + 1) + "]");
  }
  out.tested = Eigen::VectorXd::Zero(first_timers.tested.cols());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.tested[keep[j]] = median_of(fit.draws, "beta[" + std::to_string(j + 1) + "]");
  }
  return out;
}

SelectionResult stage2_select(const IndividualData& repeaters, const Stage1Medians& stage1, const RhsSpec& rhs,
                              const SamplerConfig& cfg, const SelectionThresholds& thresholds) {
  if (repeaters.fatigue.cols() < 1) throw ConfigError("stage-2 selection needs at least one fatigue candidate");
  if (repeaters.rows() < 1) throw DataError("stage-2 selection has no repeat participants");
  if (stage1.baseline.size() != repeaters.baseline.cols() || stage1.tested.size() != repeaters.tested.cols()) {
    throw ConfigError("stage-1 medians do not match the repeat-participant design");
  }
  IndividualData data = repeaters;
  data.offset = repeaters.offset.array() + stage1.intercept;
  if (stage1.baseline.size() > 0) data.offset += repeaters.baseline * stage1.baseline;
  if (stage1.tested.size() > 0) data.offset += repeaters.tested * stage1.tested;
  data.baseline.resize(repeaters.rows(), 0);
  data.baseline_names.clear();
  data.tested.resize(repeaters.rows(), 0);
  data.tested_names.clear();

  ModelSpec spec = ModelSpec::preset("stage2");
  spec.rhs = rhs;
  spec.rhs.sign = RhsSign::negative;
  const IndividualModel model(spec, data);
  const auto fit = sample(model, cfg);

  SelectionResult result;
  result.stage = 2;
  result.threshold_lower = thresholds.stage2;
  result.threshold_upper = thresholds.stage2;
  result.diagnostics = fit.diagnostics;
  result.features = summarize_coefficients(fit.draws, "gamma", repeaters.fatigue_names);
  for (auto& f : result.features) f.selected = stage2_selected(f.median, thresholds);
  return result;
}

std::vector<std::string> union_across_waves(std::span<const SelectionResult> results) {
  std::set<std::string> names;
  for (const auto& r : results) {
    for (const auto& n : r.selected_names()) names.insert(n);
  }
  return {names.begin(), names.end()};
}

}  // namespace brc
