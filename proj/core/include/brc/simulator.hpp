#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brc/config.hpp"
#include "brc/domain.hpp"
#include "brc/models.hpp"

namespace brc {

/// Categorical participant attribute with level probabilities and true log effects.
struct CategoricalTruth {
  std::string column;  ///< "sex", "household_size" or a covariate name
  std::vector<std::string> levels;
  std::vector<double> probs;
  std::vector<double> effects;
};

/// Hill fatigue applied to participants with column == level (empty column: everyone).
struct HillTruth {
  std::string column;
  std::string level;
  HillCurve curve;
};

/// f(a) = amplitude * exp(-(a - peak)^2 / (2 width^2))
struct AgeEffectTruth {
  double amplitude = 0.5;
  double peak = 35.0;
  double width = 15.0;

  double operator()(double age) const;
};

struct ScenarioConfig {
  std::string name = "default";
  int waves = 4;
  int panel_size = 500;
  /// New recruits in wave t as a share of panel_size (first entry is wave 1).
  std::vector<double> recruitment{1.0, 0.3, 0.3, 0.3};
  /// Probability that an active participant takes part in wave t (first entry unused).
  std::vector<double> retention{1.0, 0.7, 0.7, 0.7};
  double intercept = 1.8;
  std::vector<CategoricalTruth> covariates;
  AgeEffectTruth age_effect;
  std::vector<HillTruth> fatigue;
  double phi = 5.0;
  /// Emit per-band contact counts.
  bool contact_bands = false;
  bool coarsen_child_ages = true;
  std::uint64_t seed = 1;

  /// default, fatigue, no-fatigue, selection, subgroup, small.
  static ScenarioConfig preset(const std::string& name);

  void validate() const;
  FlatConfig to_config() const;
  static ScenarioConfig from_config(const FlatConfig& config);

  /// Categorical columns beyond sex and household_size.
  std::vector<std::string> covariate_columns() const;
};

struct SimulationResult {
  std::vector<SurveyRecord> records;
  Eigen::VectorXd lambda;       ///< per record, with fatigue
  Eigen::VectorXd lambda_free;  ///< per record, fatigue term removed
  FlatConfig manifest;
};

SimulationResult simulate_panel(const ScenarioConfig& cfg);

/// Writes records.csv and truth.manifest into `dir` (created if needed).
void write_simulation(const std::filesystem::path& dir, const SimulationResult& result, const ScenarioConfig& cfg);

// --------------------------------------------------------------------------
// BRC surfaces

struct BrcScenario {
  int ages = kAgeCount;
  CoarseBandSet bands = CoarseBandSet::contact_default();
  PopulationTable population;
  /// Symmetric ages x ages log-scale surface.
  Eigen::MatrixXd f;
  double beta0 = -4.0;
  double nu = 0.5;
  /// Reported share S applied to every (age, gender).
  double missingness = 1.0;
  /// Participants per (age, gender).
  double participants = 20.0;
  std::uint64_t seed = 1;

  /// Smooth assortative surface on the default grid.
  static BrcScenario smooth_default(std::uint64_t seed = 1);
};

struct BrcSimulation {
  Eigen::MatrixXd log_m;  ///< beta0 + f(a, b) + log P_b
  Eigen::MatrixXd m;
  /// Expected band counts per participant age: N S sum_{b in c} m(a, b).
  Eigen::MatrixXd expected_band;
  BrcData data;
};

/// Throws ConfigError when f is not symmetric.
BrcSimulation simulate_brc_surface(const BrcScenario& scenario);

}  // namespace brc
