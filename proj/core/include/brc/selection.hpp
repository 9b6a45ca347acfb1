#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brc/inference.hpp"
#include "brc/models.hpp"
#include "brc/priors.hpp"

namespace brc {

/// Stage 1 keeps effects outside (lower, upper); stage 2 keeps effects below `stage2`.
struct SelectionThresholds {
  double lower;   ///< log 0.95
  double upper;   ///< log 1.05
  double stage2;  ///< log 0.95

  SelectionThresholds();
};

bool stage1_selected(double median, const SelectionThresholds& t);
bool stage2_selected(double median, const SelectionThresholds& t);

struct FeatureSelection {
  std::string name;
  double median = 0.0;
  double lower50 = 0.0;
  double upper50 = 0.0;
  bool selected = false;
};

struct SelectionResult {
  int stage = 1;
  std::vector<FeatureSelection> features;
  double threshold_lower = 0.0;
  double threshold_upper = 0.0;
  Diagnostics diagnostics;

  std::vector<std::string> selected_names() const;
  /// feature, median, lower50, upper50, selected
  void write_csv(std::ostream& out) const;
};

/// Horseshoe fit of the tested block on first-time participants.
SelectionResult stage1_select(const IndividualData& first_timers, const RhsSpec& rhs, const SamplerConfig& cfg,
                              const SelectionThresholds& thresholds = {});

/// Posterior medians of the stage-1 refit with standard normal priors on the
/// selected tested features. `tested` has the full tested width with zeros
/// for features that were not selected.
struct Stage1Medians {
  double intercept = 0.0;
  Eigen::VectorXd baseline;
  Eigen::VectorXd tested;
};

Stage1Medians refit_stage1(const IndividualData& first_timers, const std::vector<std::string>& selected,
                           const SamplerConfig& cfg);

/// Negative half-horseshoe fit of the fatigue block on repeat participants
/// with the stage-1 predictor as a fixed offset.
SelectionResult stage2_select(const IndividualData& repeaters, const Stage1Medians& stage1, const RhsSpec& rhs,
                              const SamplerConfig& cfg, const SelectionThresholds& thresholds = {});

/// Sorted union of selected feature names.
std::vector<std::string> union_across_waves(std::span<const SelectionResult> results);

}  // namespace brc
