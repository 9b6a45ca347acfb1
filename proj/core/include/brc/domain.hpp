#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brc/rng.hpp"

namespace brc {

inline constexpr int kMaxAge = 84;
inline constexpr int kAgeCount = kMaxAge + 1;
inline constexpr int kDefaultContactCap = 30;

/// Inclusive integer age interval.
struct AgeBand {
  int lo = 0;
  int hi = 0;

  AgeBand() = default;
  AgeBand(int lo_, int hi_);

  bool contains(int age) const { return age >= lo && age <= hi; }
  int width() const { return hi - lo + 1; }
  /// floor((lo + hi) / 2)
  int midpoint() const { return (lo + hi) / 2; }
  /// Bands reported for minors instead of an exact age.
  bool is_child_band() const { return hi <= 18; }
  std::string label() const;

  /// Parses "lo-hi" (also accepts an en dash). Throws DataError.
  static AgeBand parse(const std::string& text);

  friend bool operator==(const AgeBand&, const AgeBand&) = default;
};

/// Ordered, disjoint age bands used for contact ages.
class CoarseBandSet {
 public:
  explicit CoarseBandSet(std::vector<AgeBand> bands);

  /// 0-4, 5-9, 10-14, 15-19, 20-24, 25-34, ..., 55-64, 65-69, ..., 80-84.
  static CoarseBandSet contact_default();
  /// 0-4, 5-9, 10-14, 15-18.
  static CoarseBandSet child_default();

  const std::vector<AgeBand>& bands() const { return bands_; }
  const std::vector<int>& midpoints() const { return midpoints_; }
  std::size_t size() const { return bands_.size(); }
  const AgeBand& operator[](std::size_t k) const { return bands_[k]; }

  std::optional<std::size_t> index_of(int age) const;
  std::optional<std::size_t> index_of(const AgeBand& band) const;

  /// Wide CSV column name for band k, e.g. "y_25_34".
  std::string column_name(std::size_t k) const;

 private:
  std::vector<AgeBand> bands_;
  std::vector<int> midpoints_;
};

/// One participant-wave observation.
struct SurveyRecord {
  std::string participant_id;
  int wave = 1;
  int repeat = 0;
  int age = 0;
  std::string sex;
  std::string household_size;
  /// Additional categorical covariates keyed by column name.
  std::map<std::string, std::string> covariates;
  int contacts = 0;
  std::optional<std::vector<int>> contacts_by_band;
  int report_date = 0;

  /// Value of a categorical column: "sex", "household_size" or a covariate.
  /// Throws DataError when the column is unknown for this record.
  const std::string& level(const std::string& column) const;
};

/// Persons by gender (0 = M, 1 = F) and single-year age.
class PopulationTable {
 public:
  PopulationTable();
  PopulationTable(std::vector<double> male, std::vector<double> female);

  double count(int gender, int age) const { return counts_[gender][age]; }
  std::span<const double> counts(int gender) const { return counts_[gender]; }
  std::size_t ages() const { return counts_[0].size(); }

 private:
  std::array<std::vector<double>, 2> counts_;
};

/// Proportion of contacts reported with age/gender detail, S[t][a][g].
class MissingnessTable {
 public:
  MissingnessTable() = default;
  /// All proportions equal to `value`.
  MissingnessTable(int waves, int ages, double value = 1.0);

  double at(int wave_index, int age, int gender) const;
  void set(int wave_index, int age, int gender, double value);
  int waves() const { return waves_; }
  int ages() const { return ages_; }

 private:
  int waves_ = 0;
  int ages_ = 0;
  std::vector<double> values_;
};

/// Sex coded as a gender index: "M" -> 0, "F" -> 1. Throws DataError otherwise.
int gender_index(const std::string& sex);

// --------------------------------------------------------------------------
// Ingestion

struct SurveySchema {
  /// Categorical columns beyond the fixed ones. Empty means "every
  /// unrecognised column that is not a contact band".
  std::vector<std::string> covariates;
  /// Permitted levels per categorical column; columns absent here accept any level.
  std::map<std::string, std::vector<std::string>> levels;
  CoarseBandSet contact_bands = CoarseBandSet::contact_default();
  int contact_cap = kDefaultContactCap;
  /// Seed for child-age imputation.
  std::uint64_t seed = 1;
};

struct SurveyLoadResult {
  std::vector<SurveyRecord> records;
  std::size_t dropped = 0;
  std::vector<std::size_t> dropped_lines;
};

SurveyLoadResult load_survey_csv(const std::filesystem::path& path, const SurveySchema& schema);
SurveyLoadResult read_survey_csv(std::istream& in, const SurveySchema& schema);

/// Writes records in the ingestion schema. Ages below 19 are written as the
/// child band label when `coarsen_child_ages` is set.
void write_survey_csv(std::ostream& out, std::span<const SurveyRecord> records,
                      const std::vector<std::string>& covariate_columns,
                      const CoarseBandSet& bands, bool coarsen_child_ages);

/// Uniform draw over {lo, ..., hi}. Throws DataError for an adult band.
int impute_child_age(const AgeBand& band, Rng& rng);

int truncate_contacts(int y, int cap = kDefaultContactCap);

/// Caps the total at `cap` and trims band counts (in band order) so that
/// their sum never exceeds the capped total.
void apply_contact_cap(SurveyRecord& record, int cap);

/// out[k] = sum of per_age over band k. per_age must have 85 entries.
std::vector<double> aggregate_to_bands(std::span<const double> per_age, const CoarseBandSet& bands);

// --------------------------------------------------------------------------
// Design matrices

enum class Coding {
  treatment,  ///< drop the reference (first alphabetical) level
  full,       ///< one column per level
};

struct CategoricalFeature {
  std::string column;
  std::vector<std::string> levels;  ///< sorted alphabetically
  Coding coding = Coding::treatment;

  CategoricalFeature() = default;
  CategoricalFeature(std::string column, std::vector<std::string> levels, Coding coding = Coding::treatment);

  const std::string& reference() const { return levels.front(); }
  std::vector<std::string> column_names() const;
};

struct FeatureBlock {
  std::string name;
  std::vector<CategoricalFeature> features;

  std::size_t width() const;
};

/// Named blocks in column order u (always included) | v (tested) | w (fatigue).
struct FeatureSpec {
  std::vector<FeatureBlock> blocks;

  const FeatureBlock* find(const std::string& name) const;
};

/// Sorted distinct levels of a column across records.
std::vector<std::string> observed_levels(std::span<const SurveyRecord> records, const std::string& column);

struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd rows;
  Eigen::VectorXd offsets;
  /// Block name -> [first column, one past last).
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> block_ranges;

  Eigen::MatrixXd block(const std::string& name) const;
  std::vector<std::string> block_names(const std::string& name) const;
};

DesignMatrix build_design(std::span<const SurveyRecord> records, const FeatureSpec& spec);

}  // namespace brc
