#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brc/domain.hpp"
#include "brc/inference.hpp"
#include "brc/models.hpp"

namespace brc {

enum class PriorProvenance { initial, propagated };
enum class Propagation { mean, median };

struct WaveData {
  int wave = 1;
  IndividualData data;
};

struct WaveFit {
  int wave = 1;
  PriorProvenance provenance = PriorProvenance::initial;
  ModelSpec spec;
  /// Posterior means and medians of the constrained blocks beta, hill_gamma, hill_zeta, hill_eta.
  std::map<std::string, Eigen::VectorXd> posterior_mean;
  std::map<std::string, Eigen::VectorXd> posterior_median;
  std::shared_ptr<const IndividualModel> model;
  std::shared_ptr<const PosteriorDraws> draws;
  Diagnostics diagnostics;
  std::vector<std::string> warnings;
};

struct SequenceConfig {
  SamplerConfig sampler;
  Propagation propagation = Propagation::mean;
  double beta_sd = 0.3;
  double gamma_sd = 0.3;
  double zeta_sd = 0.1;
  double eta_sd = 0.1;
};

/// Base spec with priors centred on the previous wave's posterior summaries.
ModelSpec propagate_priors(const ModelSpec& base, const WaveFit& previous, const SequenceConfig& cfg);

/// Fits one wave and fills the posterior summaries.
WaveFit fit_wave(const WaveData& wave, const ModelSpec& spec, const SamplerConfig& cfg,
                 PriorProvenance provenance = PriorProvenance::initial);

/// Waves in order; wave t > first uses priors propagated from wave t-1.
/// Empty waves are skipped with a warning. The model must be from the gam family.
std::vector<WaveFit> fit_sequence(std::span<const WaveData> waves, const ModelSpec& spec, const SequenceConfig& cfg);

/// Every wave fitted on its own with the base priors.
std::vector<WaveFit> fit_independent(std::span<const WaveData> waves, const ModelSpec& spec,
                                     const SamplerConfig& cfg);

// --------------------------------------------------------------------------
// Population estimates

enum class EstimateMethod { bayes_debiased, bayes_unadjusted, bayes_firsttime, bootstrap };

std::string to_string(EstimateMethod method);

struct PopulationEstimate {
  int wave = 1;
  EstimateMethod method = EstimateMethod::bayes_debiased;
  double median = 0.0;
  double lower = 0.0;  ///< 2.5%
  double upper = 0.0;  ///< 97.5%
};

/// Population shares keyed by stratum (see stratum_key).
using StratumShares = std::map<std::string, double>;

/// "<age band>|<sex>|<household size>" with the default contact bands.
std::string stratum_key(const SurveyRecord& record);

/// Record weights w_i = share(stratum_i) / count(stratum_i). With empty
/// shares every record weighs 1/n. Throws DataError when a stratum present in
/// the records has no share or the shares do not sum to one.
Eigen::VectorXd stratum_weights(std::span<const SurveyRecord> records, const StratumShares& shares);

/// Weighted average of predicted intensities per draw over the rows of `strata`.
PopulationEstimate poststratified_mean(const WaveFit& fit, const IndividualData& strata,
                                       const Eigen::VectorXd& weights, bool debias);

/// Participant-level bootstrap of the weighted mean contact count.
PopulationEstimate bootstrap_mean(std::span<const SurveyRecord> records, int resamples,
                                  const Eigen::VectorXd& weights, std::uint64_t seed, int wave = 1);

void write_estimates_csv(std::ostream& out, std::span<const PopulationEstimate> estimates);

// --------------------------------------------------------------------------
// Incremental inclusion study

struct AgeCurve {
  std::vector<double> ages;
  std::vector<double> median;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// exp(beta0 + f(a)) per draw at the reference covariate profile with no fatigue.
AgeCurve age_curve(const IndividualModel& model, const PosteriorDraws& draws, std::span<const double> ages);

struct StudyRow {
  int cap = 0;
  double mape_adjusted = 0.0;
  double coverage_adjusted = 0.0;
  double mape_unadjusted = 0.0;
  double coverage_unadjusted = 0.0;
};

struct StudyConfig {
  std::vector<int> caps;
  std::vector<double> ages;  ///< evaluation grid for the age curves
  SamplerConfig sampler;
};

/// Baseline fit on first-timers only, then for each cap a fit on records with
/// repeat <= cap using the adjusted and the unadjusted spec. Throws DataError
/// when the data has no first-timers.
std::vector<StudyRow> incremental_inclusion_study(const IndividualData& wave, const ModelSpec& adjusted,
                                                  const ModelSpec& unadjusted, const StudyConfig& cfg);

void write_study_csv(std::ostream& out, std::span<const StudyRow> rows);

}  // namespace brc
