#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "brc/config.hpp"
#include "brc/domain.hpp"
#include "brc/draws.hpp"
#include "brc/kernels.hpp"
#include "brc/params.hpp"
#include "brc/priors.hpp"

namespace brc {

// --------------------------------------------------------------------------
// Fatigue curves

/// rho(r) = -gamma e^zeta r^eta / (1 + e^zeta r^eta)
struct HillCurve {
  double gamma = 0.0;
  double zeta = 0.0;
  double eta = 1.0;

  /// 100 (e^{-gamma} - 1): asymptotic percent change at large r.
  double asymptotic_percent_change() const;
};

double hill(const HillCurve& curve, double r);

struct HillGradient {
  double value = 0.0;
  double d_gamma = 0.0;
  double d_zeta = 0.0;
  double d_eta = 0.0;
};

/// Value and partial derivatives; all zero at r = 0.
HillGradient hill_gradient(const HillCurve& curve, double r);

enum class FatigueKind {
  none,
  independent_effects,  ///< rho_r ~ N(0, 1), r >= 1
  identical_effect,     ///< one shared rho for every r >= 1
  gp_on_repeats,        ///< SE-kernel GP on standardised repeat counts
  hill,                 ///< single Hill curve
  hill_per_covariate,   ///< one Hill curve per fatigue-block column
  variant_a,            ///< -exp(rho_r + f_r(a))
  variant_b,            ///< -exp(rho_r + f_r(a) + f_r(c'))
  variant_c,            ///< -exp(rho_r + f_r(a, c'))
};

std::string to_string(FatigueKind kind);
FatigueKind fatigue_kind_from_string(const std::string& name);

struct FatigueSpec {
  FatigueKind kind = FatigueKind::none;
  /// Largest repeat index with its own effect; 0 means "take it from the data".
  int max_repeat = 0;
};

/// Latent pieces entering the BRC fatigue variants for one (r, a, c') cell.
struct FatigueLatents {
  double rho = 0.0;      ///< rho_r (or the Hill value for FatigueKind::hill)
  double f_age = 0.0;    ///< f_r(a)
  double f_mid = 0.0;    ///< f_r(c')
  double f_joint = 0.0;  ///< f_r(a, c')
};

/// Fatigue adjustment on the log-intensity scale. Zero for r = 0; strictly
/// negative for the A/B/C variants.
double fatigue_variant_term(FatigueKind kind, int r, const FatigueLatents& latents);

// --------------------------------------------------------------------------
// Observation models

enum class Observation { poisson, nb1, nb2 };

struct CountLogPmf {
  double logp = 0.0;
  double d_mean = 0.0;
  double d_dispersion = 0.0;
};

/// NB2: shape phi, Var = mu + mu^2/phi.
/// NB1: shape mu/nu, event probability nu/(1+nu), Var = mu (1 + nu).
/// Throws DataError for y < 0.
CountLogPmf nb_logpmf(int y, double mean, double dispersion, Observation kind);
CountLogPmf poisson_logpmf(int y, double mean);

/// NB1 with explicit shape (used for band sums): d_mean is d/dshape here.
CountLogPmf nb1_shape_logpmf(int y, double shape, double nu);

// --------------------------------------------------------------------------
// Model specification

enum class ModelFamily { stage1_poisson, stage2_poisson, longitudinal_nb, aggregated_brc, individual_gam };

std::string to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& name);
std::string to_string(Observation obs);
Observation observation_from_string(const std::string& name);

struct HsgpConfig {
  int m = 30;
  double c = 1.5;
};

struct ModelSpec {
  ModelFamily family = ModelFamily::individual_gam;
  Observation observation = Observation::nb2;
  FatigueSpec fatigue;

  HsgpConfig age_gp{30, 1.5};      ///< f(age) in the GAM; fatigue-variant GPs in the BRC
  HsgpConfig time_gp{30, 1.5};     ///< calendar-time GP; m = 0 drops the term
  HsgpConfig repeat_gp{30, 1.5};   ///< GP on repeats
  HsgpConfig surface_gp{40, 1.5};  ///< 2D BRC surfaces

  /// Stage 1 only: horseshoe on the tested block (false: standard normal priors).
  bool tested_rhs = true;
  /// K, n and sign are filled from the data; p0 <= 0 means K/2.
  RhsSpec rhs;

  /// Per-block prior overrides; a single entry broadcasts over the block.
  std::map<std::string, std::vector<PriorSpec>> priors;

  /// BRC: tau_1 = 0 alongside rho_0 = 0.
  bool pin_first_wave = true;

  /// Named presets: stage1, stage1-refit, stage2, longitudinal-{none,independent,
  /// identical,gp,hill}, gam, gam-hill, brc-{original,a,b,c,hill,none}.
  static ModelSpec preset(const std::string& name);

  void validate() const;

  FlatConfig to_config() const;
  static ModelSpec from_config(const FlatConfig& config);
};

// --------------------------------------------------------------------------
// Data

/// Participant-level data shared by the stage-1/2, longitudinal and GAM families.
struct IndividualData {
  Eigen::MatrixXd baseline;  ///< u (or x) block
  Eigen::MatrixXd tested;    ///< v block
  Eigen::MatrixXd fatigue;   ///< w block
  std::vector<std::string> baseline_names;
  std::vector<std::string> tested_names;
  std::vector<std::string> fatigue_names;
  Eigen::VectorXd age;
  Eigen::VectorXi repeat;
  Eigen::VectorXi wave;
  Eigen::VectorXd offset;
  Eigen::VectorXi y;

  Eigen::Index rows() const { return y.size(); }

  /// Uses design blocks "u", "v" and "w" when present.
  static IndividualData from_records(std::span<const SurveyRecord> records, const DesignMatrix& design);

  IndividualData subset(const std::vector<Eigen::Index>& rows) const;
  void validate() const;
};

enum class ContactGender : int { male = 0, female = 1, any = 2 };

/// Summed band count for participants sharing (wave, repeat, age, gender).
struct BrcCell {
  int wave = 0;  ///< 0-based wave index
  int repeat = 0;
  int age = 0;
  int gender = 0;
  ContactGender contact_gender = ContactGender::any;
  int band = 0;
  int y = 0;
  double participants = 1.0;  ///< N_{tra}^g
};

struct BrcData {
  int waves = 1;
  int max_repeat = 0;
  int ages = kAgeCount;
  CoarseBandSet bands = CoarseBandSet::contact_default();
  PopulationTable population;
  MissingnessTable missingness;
  std::vector<BrcCell> cells;

  /// Aggregates records with contact-band detail. Participant counts include
  /// every record; the missingness table is estimated as reported band
  /// contacts over total contacts when not supplied.
  static BrcData from_records(std::span<const SurveyRecord> records, const CoarseBandSet& bands,
                              const PopulationTable& population, const MissingnessTable* missingness = nullptr);

  void validate() const;
};

// --------------------------------------------------------------------------
// Models

/// Differentiable log density on an unconstrained space.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual Eigen::Index dim() const = 0;
  /// Returns -inf (never throws) when the density is not finite at theta.
  virtual double log_density(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const = 0;
};

class Model : public LogDensity {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::Index dim() const override { return layout_.dim(); }

  double log_density(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const override;

  /// Log posterior (likelihood + priors + log-Jacobian). Throws
  /// NonFiniteError when a linear predictor is not finite.
  virtual double log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const = 0;

  virtual Eigen::Index observations() const = 0;
  virtual Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& theta) const = 0;

  virtual std::vector<std::string> output_names() const;
  virtual Eigen::VectorXd outputs(const Eigen::VectorXd& theta) const;

 protected:
  ModelSpec spec_;
  ParamLayout layout_;
};

/**
 * Stage-1/stage-2 Poisson selection models, the longitudinal NB2 model and the
 * NB2 generalised additive model. Rows sharing an identical predictor are
 * collapsed so each evaluation costs one pass over distinct predictor rows.
 */
class IndividualModel : public Model {
 public:
  IndividualModel(ModelSpec spec, IndividualData data);

  double log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const override;
  Eigen::Index observations() const override { return data_.rows(); }
  Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& theta) const override;
  std::vector<std::string> output_names() const override;
  Eigen::VectorXd outputs(const Eigen::VectorXd& theta) const override;

  const IndividualData& data() const { return data_; }

  /// Log intensity per row of `newdata`; with `debias` the fatigue term is zero.
  Eigen::VectorXd predict_log_intensity(const Eigen::VectorXd& theta, const IndividualData& newdata,
                                        bool debias) const;

  /// Fatigue contribution for fatigue column q (ignored by single-curve kinds) at repeat r.
  double fatigue_effect(const Eigen::VectorXd& theta, Eigen::Index q, int r) const;

  /// Smooth age effect f(a) at the given ages (GAM only; zeros otherwise).
  Eigen::VectorXd age_effect(const Eigen::VectorXd& theta, std::span<const double> ages) const;

  /// Mean and SD used to standardise repeat counts for the repeat GP.
  std::pair<double, double> repeat_scaling() const { return {repeat_mean_, repeat_sd_}; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  IndividualData data_;
  double repeat_mean_ = 0.0;
  double repeat_sd_ = 1.0;
};

/// Aggregated Bayesian rate-consistency model with NB1 band likelihood.
class BrcModel : public Model {
 public:
  BrcModel(ModelSpec spec, BrcData data);

  double log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const override;
  Eigen::Index observations() const override { return static_cast<Eigen::Index>(data_.cells.size()); }
  Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& theta) const override;

  const BrcData& data() const { return data_; }

  /// log m_{t a b}^{g h} on the full age grid (includes log P_b^h).
  Eigen::MatrixXd log_intensity_surface(const Eigen::VectorXd& theta, int wave, int g, int h) const;

  /// Fatigue term for repeat r, participant age a and contact band c.
  double fatigue_term(const Eigen::VectorXd& theta, int r, int age, int band) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  BrcData data_;
};

std::unique_ptr<IndividualModel> make_model(const ModelSpec& spec, const IndividualData& data);
std::unique_ptr<BrcModel> make_model(const ModelSpec& spec, const BrcData& data);

struct LogPosterior {
  double logp = 0.0;
  Eigen::VectorXd grad;
};

LogPosterior log_posterior(const Model& model, const Eigen::VectorXd& theta);

/// Intensity draws (draws x rows). `debias` predicts every row as a first-time participant.
Eigen::MatrixXd predict_intensity(const IndividualModel& model, const PosteriorDraws& draws,
                                  const IndividualData& newdata, bool debias);

}  // namespace brc
