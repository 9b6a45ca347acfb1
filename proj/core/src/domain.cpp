#include "brc/domain.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "brc/csv.hpp"
#include "brc/error.hpp"

namespace brc {

namespace {

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string normalise_dash(std::string s) {
  // en dash (U+2013) as UTF-8
  const std::string en = "\xE2\x80\x93";
  for (auto pos = s.find(en); pos != std::string::npos; pos = s.find(en)) s.replace(pos, en.size(), "-");
  return s;
}

const std::set<std::string> kFixedColumns = {"participant_id", "wave",     "repeat",     "age",
                                             "sex",            "contacts", "report_date", "household_size"};

}  // namespace

// --------------------------------------------------------------------------
// Age bands

AgeBand::AgeBand(int lo_, int hi_) : lo(lo_), hi(hi_) {
  if (lo < 0 || hi < lo || hi > kMaxAge) {
    throw DataError("invalid age band " + std::to_string(lo) + "-" + std::to_string(hi));
  }
}

std::string AgeBand::label() const { return std::to_string(lo) + "-" + std::to_string(hi); }

AgeBand AgeBand::parse(const std::string& text) {
  const std::string s = normalise_dash(text);
  const auto dash = s.find('-');
  int lo = 0, hi = 0;
  if (dash == std::string::npos || !parse_int(s.substr(0, dash), lo) || !parse_int(s.substr(dash + 1), hi)) {
    throw DataError("malformed age band '" + text + "'");
  }
  return AgeBand(lo, hi);
}

CoarseBandSet::CoarseBandSet(std::vector<AgeBand> bands) : bands_(std::move(bands)) {
  if (bands_.empty()) throw ConfigError("band set is empty");
  for (std::size_t k = 1; k < bands_.size(); ++k) {
    if (bands_[k].lo <= bands_[k - 1].hi) throw ConfigError("bands must be disjoint and ordered");
  }
  midpoints_.reserve(bands_.size());
  for (const auto& b : bands_) midpoints_.push_back(b.midpoint());
}

CoarseBandSet CoarseBandSet::contact_default() {
  return CoarseBandSet({{0, 4},
                        {5, 9},
                        {10, 14},
                        {15, 19},
                        {20, 24},
                        {25, 34},
                        {35, 44},
                        {45, 54},
                        {55, 64},
                        {65, 69},
                        {70, 74},
                        {75, 79},
                        {80, 84}});
}

CoarseBandSet CoarseBandSet::child_default() { return CoarseBandSet({{0, 4}, {5, 9}, {10, 14}, {15, 18}}); }

std::optional<std::size_t> CoarseBandSet::index_of(int age) const {
  for (std::size_t k = 0; k < bands_.size(); ++k) {
    if (bands_[k].contains(age)) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> CoarseBandSet::index_of(const AgeBand& band) const {
  for (std::size_t k = 0; k < bands_.size(); ++k) {
    if (bands_[k] == band) return k;
  }
  return std::nullopt;
}

std::string CoarseBandSet::column_name(std::size_t k) const {
  return "y_" + std::to_string(bands_.at(k).lo) + "_" + std::to_string(bands_.at(k).hi);
}

// --------------------------------------------------------------------------
// Records and tables

const std::string& SurveyRecord::level(const std::string& column) const {
  if (column == "sex") return sex;
  if (column == "household_size") return household_size;
  auto it = covariates.find(column);
  if (it == covariates.end()) throw DataError("record " + participant_id + " has no column '" + column + "'");
  return it->second;
}

PopulationTable::PopulationTable() {
  for (int g = 0; g < 2; ++g) {
    counts_[g].resize(kAgeCount);
    for (int a = 0; a < kAgeCount; ++a) {
      // Stylised pyramid: flat to 55, then declining.
      const double base = 1.0e6 * (a < 55 ? 1.0 : 1.0 - 0.025 * (a - 55));
      counts_[g][a] = base * (g == 0 ? 1.0 : 1.0 + 0.002 * a);
    }
  }
}

PopulationTable::PopulationTable(std::vector<double> male, std::vector<double> female) {
  if (male.size() != female.size() || male.empty()) throw DataError("population vectors must have equal length");
  for (std::size_t a = 0; a < male.size(); ++a) {
    if (!(male[a] > 0.0) || !(female[a] > 0.0)) throw DataError("population counts must be positive");
  }
  counts_[0] = std::move(male);
  counts_[1] = std::move(female);
}

MissingnessTable::MissingnessTable(int waves, int ages, double value)
    : waves_(waves), ages_(ages), values_(static_cast<std::size_t>(waves) * ages * 2, value) {
  if (waves < 1 || ages < 1) throw ConfigError("missingness table needs at least one wave and age");
  if (!(value > 0.0 && value <= 1.0)) throw DataError("reported share must lie in (0, 1]");
}

double MissingnessTable::at(int wave_index, int age, int gender) const {
  if (wave_index < 0 || wave_index >= waves_ || age < 0 || age >= ages_ || gender < 0 || gender > 1) {
    throw std::out_of_range("missingness index out of range");
  }
  return values_[(static_cast<std::size_t>(wave_index) * ages_ + age) * 2 + gender];
}

void MissingnessTable::set(int wave_index, int age, int gender, double value) {
  if (wave_index < 0 || wave_index >= waves_ || age < 0 || age >= ages_ || gender < 0 || gender > 1) {
    throw std::out_of_range("missingness index out of range");
  }
  if (!(value > 0.0 && value <= 1.0)) throw DataError("reported share must lie in (0, 1]");
  values_[(static_cast<std::size_t>(wave_index) * ages_ + age) * 2 + gender] = value;
}

int gender_index(const std::string& sex) {
  if (sex == "M" || sex == "male" || sex == "Male") return 0;
  if (sex == "F" || sex == "female" || sex == "Female") return 1;
  throw DataError("unknown sex level '" + sex + "'");
}

// --------------------------------------------------------------------------
// Preprocessing

int impute_child_age(const AgeBand& band, Rng& rng) {
  if (!band.is_child_band()) throw DataError("band " + band.label() + " is not a child band");
  std::uniform_int_distribution<int> dist(band.lo, band.hi);
  return dist(rng);
}

int truncate_contacts(int y, int cap) {
  if (y < 0) throw DataError("negative contact count");
  return std::min(y, cap);
}

void apply_contact_cap(SurveyRecord& record, int cap) {
  record.contacts = truncate_contacts(record.contacts, cap);
  if (!record.contacts_by_band) return;
  int budget = record.contacts;
  for (int& y : *record.contacts_by_band) {
    y = std::min(y, budget);
    budget -= y;
  }
}

std::vector<double> aggregate_to_bands(std::span<const double> per_age, const CoarseBandSet& bands) {
  if (per_age.size() != static_cast<std::size_t>(kAgeCount)) {
    throw DataError("per-age vector must have " + std::to_string(kAgeCount) + " entries");
  }
  std::vector<double> out(bands.size(), 0.0);
  for (std::size_t k = 0; k < bands.size(); ++k) {
    for (int b = bands[k].lo; b <= bands[k].hi; ++b) out[k] += per_age[b];
  }
  return out;
}

// --------------------------------------------------------------------------
// CSV ingestion

SurveyLoadResult load_survey_csv(const std::filesystem::path& path, const SurveySchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  auto result = read_survey_csv(in, schema);
  if (result.dropped > 0) {
    spdlog::info("{}: dropped {} row(s) with missing age or sex", path.string(), result.dropped);
  }
  return result;
}

SurveyLoadResult read_survey_csv(std::istream& in, const SurveySchema& schema) {
  SurveyLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  if (!csv::read_line(in, line, line_no)) throw DataError("missing header row");

  const auto header = csv::split_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i])) throw DataError("duplicate column '" + header[i] + "'", line_no);
    col[header[i]] = i;
  }
  for (const char* required : {"participant_id", "wave", "repeat", "age", "sex", "household_size", "contacts"}) {
    if (!col.count(required)) throw DataError(std::string("missing column '") + required + "'", line_no);
  }

  const auto& bands = schema.contact_bands;
  std::vector<std::optional<std::size_t>> band_cols(bands.size());
  bool any_band = false;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    auto it = col.find(bands.column_name(k));
    if (it != col.end()) {
      band_cols[k] = it->second;
      any_band = true;
    }
  }
  if (any_band) {
    for (std::size_t k = 0; k < bands.size(); ++k) {
      if (!band_cols[k]) throw DataError("missing band column '" + bands.column_name(k) + "'", line_no);
    }
  }
  std::set<std::string> band_names;
  for (std::size_t k = 0; k < bands.size(); ++k) band_names.insert(bands.column_name(k));

  std::vector<std::string> covariates = schema.covariates;
  if (covariates.empty()) {
    for (const auto& h : header) {
      if (!kFixedColumns.count(h) && !band_names.count(h) && h.rfind("y_", 0) != 0) covariates.push_back(h);
    }
  } else {
    for (const auto& c : covariates) {
      if (!col.count(c)) throw DataError("missing covariate column '" + c + "'", line_no);
    }
  }

  auto check_level = [&](const std::string& column, const std::string& value) {
    auto it = schema.levels.find(column);
    if (it == schema.levels.end()) return;
    if (std::find(it->second.begin(), it->second.end(), value) == it->second.end()) {
      throw DataError("unknown level '" + value + "' in column '" + column + "'", line_no);
    }
  };

  Rng rng = make_rng(schema.seed, 0x636869ULL);
  while (csv::read_line(in, line, line_no)) {
    std::vector<std::string> f;
    try {
      f = csv::split_line(line);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
    if (f.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                      line_no);
    }
    auto field = [&](const char* name) -> const std::string& { return f[col.at(name)]; };

    const std::string& age_text = field("age");
    const std::string& sex = field("sex");
    if (age_text.empty() || sex.empty()) {
      ++result.dropped;
      result.dropped_lines.push_back(line_no);
      continue;
    }

    SurveyRecord r;
    r.participant_id = field("participant_id");
    if (r.participant_id.empty()) throw DataError("empty participant_id", line_no);
    if (!parse_int(field("wave"), r.wave) || r.wave < 1) throw DataError("wave must be an integer >= 1", line_no);
    if (!parse_int(field("repeat"), r.repeat) || r.repeat < 0) {
      throw DataError("repeat must be an integer >= 0", line_no);
    }
    if (!parse_int(field("contacts"), r.contacts) || r.contacts < 0) {
      throw DataError("contacts must be a non-negative integer", line_no);
    }
    if (col.count("report_date") && !field("report_date").empty() && !parse_int(field("report_date"), r.report_date)) {
      throw DataError("report_date must be an integer day index", line_no);
    }

    if (parse_int(age_text, r.age)) {
      if (r.age < 0 || r.age > kMaxAge) throw DataError("age out of range 0-84: " + age_text, line_no);
    } else {
      AgeBand band;
      try {
        band = AgeBand::parse(age_text);
      } catch (const DataError&) {
        throw DataError("age out of range 0-84: " + age_text, line_no);
      }
      if (!band.is_child_band()) throw DataError("adult age must be exact, got band " + age_text, line_no);
      r.age = impute_child_age(band, rng);
    }

    r.sex = sex;
    check_level("sex", r.sex);
    r.household_size = field("household_size");
    check_level("household_size", r.household_size);
    for (const auto& c : covariates) {
      const std::string& v = f[col.at(c)];
      check_level(c, v);
      r.covariates[c] = v;
    }

    if (any_band) {
      bool all_empty = true;
      for (const auto& bc : band_cols) all_empty = all_empty && f[*bc].empty();
      if (!all_empty) {
        std::vector<int> ys(bands.size(), 0);
        long long sum = 0;
        for (std::size_t k = 0; k < bands.size(); ++k) {
          const std::string& s = f[*band_cols[k]];
          if (s.empty()) continue;
          if (!parse_int(s, ys[k]) || ys[k] < 0) throw DataError("malformed band count '" + s + "'", line_no);
          sum += ys[k];
        }
        if (sum > r.contacts) throw DataError("band counts exceed the contact total", line_no);
        r.contacts_by_band = std::move(ys);
      }
    }
    apply_contact_cap(r, schema.contact_cap);
    result.records.push_back(std::move(r));
  }
  return result;
}

void write_survey_csv(std::ostream& out, std::span<const SurveyRecord> records,
                      const std::vector<std::string>& covariate_columns, const CoarseBandSet& bands,
                      bool coarsen_child_ages) {
  bool with_bands = false;
  for (const auto& r : records) with_bands = with_bands || r.contacts_by_band.has_value();

  std::vector<std::string> header = {"participant_id", "wave", "repeat", "age", "sex", "household_size", "contacts",
                                     "report_date"};
  for (const auto& c : covariate_columns) header.push_back(c);
  if (with_bands) {
    for (std::size_t k = 0; k < bands.size(); ++k) header.push_back(bands.column_name(k));
  }
  out << csv::join(header) << '\n';

  const auto child = CoarseBandSet::child_default();
  std::vector<std::string> row;
  for (const auto& r : records) {
    row.clear();
    row.push_back(r.participant_id);
    row.push_back(std::to_string(r.wave));
    row.push_back(std::to_string(r.repeat));
    auto band = child.index_of(r.age);
    row.push_back(coarsen_child_ages && band ? child[*band].label() : std::to_string(r.age));
    row.push_back(r.sex);
    row.push_back(r.household_size);
    row.push_back(std::to_string(r.contacts));
    row.push_back(std::to_string(r.report_date));
    for (const auto& c : covariate_columns) row.push_back(r.level(c));
    if (with_bands) {
      for (std::size_t k = 0; k < bands.size(); ++k) {
        row.push_back(r.contacts_by_band ? std::to_string(r.contacts_by_band->at(k)) : std::string());
      }
    }
    out << csv::join(row) << '\n';
  }
}

// --------------------------------------------------------------------------
// Design matrices

CategoricalFeature::CategoricalFeature(std::string column_, std::vector<std::string> levels_, Coding coding_)
    : column(std::move(column_)), levels(std::move(levels_)), coding(coding_) {
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.empty()) throw ConfigError("feature '" + column + "' has no levels");
}

std::vector<std::string> CategoricalFeature::column_names() const {
  std::vector<std::string> out;
  for (std::size_t i = coding == Coding::treatment ? 1 : 0; i < levels.size(); ++i) {
    out.push_back(column + ":" + levels[i]);
  }
  return out;
}

std::size_t FeatureBlock::width() const {
  std::size_t w = 0;
  for (const auto& f : features) w += f.column_names().size();
  return w;
}

const FeatureBlock* FeatureSpec::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::vector<std::string> observed_levels(std::span<const SurveyRecord> records, const std::string& column) {
  std::set<std::string> levels;
  for (const auto& r : records) levels.insert(r.level(column));
  return {levels.begin(), levels.end()};
}

Eigen::MatrixXd DesignMatrix::block(const std::string& name) const {
  auto it = block_ranges.find(name);
  if (it == block_ranges.end()) return Eigen::MatrixXd(rows.rows(), 0);
  return rows.middleCols(it->second.first, it->second.second - it->second.first);
}

std::vector<std::string> DesignMatrix::block_names(const std::string& name) const {
  auto it = block_ranges.find(name);
  if (it == block_ranges.end()) return {};
  return {column_names.begin() + it->second.first, column_names.begin() + it->second.second};
}

DesignMatrix build_design(std::span<const SurveyRecord> records, const FeatureSpec& spec) {
  DesignMatrix d;
  Eigen::Index width = 0;
  for (const auto& b : spec.blocks) {
    if (d.block_ranges.count(b.name)) throw ConfigError("duplicate feature block '" + b.name + "'");
    const Eigen::Index w = static_cast<Eigen::Index>(b.width());
    d.block_ranges[b.name] = {width, width + w};
    width += w;
    for (const auto& f : b.features) {
      for (auto& n : f.column_names()) d.column_names.push_back(n);
    }
  }
  const auto n = static_cast<Eigen::Index>(records.size());
  d.rows = Eigen::MatrixXd::Zero(n, width);
  d.offsets = Eigen::VectorXd::Zero(n);

  Eigen::Index c0 = 0;
  for (const auto& b : spec.blocks) {
    for (const auto& f : b.features) {
      const auto first = f.coding == Coding::treatment ? 1 : 0;
      const Eigen::Index w = static_cast<Eigen::Index>(f.levels.size()) - first;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& v = records[i].level(f.column);
        auto it = std::lower_bound(f.levels.begin(), f.levels.end(), v);
        if (it == f.levels.end() || *it != v) {
          throw DataError("level '" + v + "' of column '" + f.column + "' is not in the feature specification");
        }
        const auto idx = static_cast<Eigen::Index>(it - f.levels.begin()) - first;
        if (idx >= 0) d.rows(i, c0 + idx) = 1.0;
      }
      c0 += w;
    }
  }
  return d;
}

}  // namespace brc
