#include "brc/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brc/csv.hpp"
#include "brc/error.hpp"

namespace brc {

double AgeEffectTruth::operator()(double age) const {
  const double d = age - peak;
  return amplitude * std::exp(-d * d / (2.0 * width * width));
}

namespace {

const char* const kSex = "sex";
const char* const kHousehold = "household_size";

CategoricalTruth default_sex() { return {kSex, {"F", "M"}, {0.5, 0.5}, {0.0, 0.0}}; }

CategoricalTruth default_household() {
  return {kHousehold, {"1", "2", "3", "4", "5+"}, {0.2, 0.3, 0.2, 0.2, 0.1}, {-0.2, 0.0, 0.1, 0.15, 0.2}};
}

HillTruth reference_hill(std::string column = {}, std::string level = {}) {
  return {std::move(column), std::move(level), HillCurve{0.88, -1.55, 0.94}};
}

double entry(const std::vector<double>& v, int t) {
  return v[static_cast<std::size_t>(std::min<int>(t, static_cast<int>(v.size()) - 1))];
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<double> split_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split(text)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("'" + key + "' is not a list of numbers");
    out.push_back(v);
  }
  return out;
}

std::size_t draw_level(const std::vector<double>& probs, Rng& rng) {
  std::discrete_distribution<std::size_t> d(probs.begin(), probs.end());
  return d(rng);
}

// Gamma-Poisson draw with mean `mean` and Gamma shape `shape`.
int gamma_poisson(double mean, double shape, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  std::gamma_distribution<double> g(shape, mean / shape);
  const double rate = g(rng);
  if (!(rate > 0.0)) return 0;
  std::poisson_distribution<int> p(rate);
  return p(rng);
}

struct Participant {
  std::string id;
  int age = 0;
  std::map<std::string, std::string> levels;
  double log_base = 0.0;  ///< intercept + categorical effects + age effect
  int repeat = 0;
};

}  // namespace

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.covariates = {default_sex(), default_household()};
  if (name == "default") {
    c.fatigue = {reference_hill()};
  } else if (name == "fatigue") {
    c.waves = 10;
    c.panel_size = 2000;
    c.recruitment = {1.0, 0.1};
    c.retention = {1.0, 0.9};
    c.fatigue = {reference_hill()};
  } else if (name == "no-fatigue") {
    c.fatigue.clear();
  } else if (name == "selection") {
    c.panel_size = 1000;
    c.covariates.push_back({"occupation", {"office", "retail", "student"}, {0.4, 0.3, 0.3}, {0.0, 0.35, 0.0}});
    c.covariates.push_back({"region", {"east", "north", "south"}, {0.3, 0.4, 0.3}, {0.0, 0.0, -0.3}});
    c.covariates.push_back({"vaccinated", {"no", "yes"}, {0.4, 0.6}, {0.0, 0.0}});
    c.fatigue = {reference_hill("occupation", "retail")};
  } else if (name == "subgroup") {
    c.panel_size = 1000;
    c.fatigue = {{kSex, "F", HillCurve{1.2, -1.0, 1.0}}, {kSex, "M", HillCurve{0.4, -1.0, 1.0}}};
  } else if (name == "small") {
    c.waves = 3;
    c.panel_size = 200;
    c.recruitment = {1.0, 0.4};
    c.retention = {1.0, 0.7};
    c.fatigue = {reference_hill()};
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return c;
}

void ScenarioConfig::validate() const {
  if (waves < 1) throw ConfigError("scenario needs at least one wave");
  if (panel_size < 1) throw ConfigError("panel_size must be positive");
  if (recruitment.empty() || retention.empty()) throw ConfigError("recruitment and retention need at least one entry");
  for (double r : recruitment) {
    if (!(r >= 0.0)) throw ConfigError("recruitment shares must be non-negative");
  }
  for (double r : retention) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("retention probabilities must lie in [0, 1]");
  }
  if (!(phi > 0.0)) throw ConfigError("phi must be positive");
  if (!(age_effect.width > 0.0)) throw ConfigError("age effect width must be positive");
  std::set<std::string> seen;
  for (const auto& c : covariates) {
    if (c.column.empty()) throw ConfigError("covariate without a column name");
    if (!seen.insert(c.column).second) throw ConfigError("duplicate covariate '" + c.column + "'");
    if (c.levels.empty() || c.levels.size() != c.probs.size() || c.levels.size() != c.effects.size()) {
      throw ConfigError("covariate '" + c.column + "' needs matching levels, probs and effects");
    }
    double total = 0.0;
    for (double p : c.probs) {
      if (!(p >= 0.0)) throw ConfigError("covariate '" + c.column + "' has a negative probability");
      total += p;
    }
    if (!(total > 0.0)) throw ConfigError("covariate '" + c.column + "' has no probability mass");
  }
  for (const auto& f : fatigue) {
    if (!(f.curve.gamma >= 0.0) || !(f.curve.eta > 0.0)) throw ConfigError("Hill truth needs gamma >= 0 and eta > 0");
    if (!f.column.empty() && f.column != kSex && f.column != kHousehold && !seen.count(f.column)) {
      throw ConfigError("Hill truth refers to unknown column '" + f.column + "'");
    }
  }
}

std::vector<std::string> ScenarioConfig::covariate_columns() const {
  std::vector<std::string> out;
  for (const auto& c : covariates) {
    if (c.column != kSex && c.column != kHousehold) out.push_back(c.column);
  }
  return out;
}

FlatConfig ScenarioConfig::to_config() const {
  FlatConfig c;
  c.set("name", name);
  c.set("waves", static_cast<long long>(waves));
  c.set("panel_size", static_cast<long long>(panel_size));
  c.set("recruitment", join_doubles(recruitment));
  c.set("retention", join_doubles(retention));
  c.set("intercept", intercept);
  c.set("phi", phi);
  c.set("contact_bands", contact_bands ? "true" : "false");
  c.set("coarsen_child_ages", coarsen_child_ages ? "true" : "false");
  c.set("seed", std::to_string(seed));
  c.set("age_effect.amplitude", age_effect.amplitude);
  c.set("age_effect.peak", age_effect.peak);
  c.set("age_effect.width", age_effect.width);
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    const std::string p = "covariate." + std::to_string(i + 1) + ".";
    c.set(p + "column", covariates[i].column);
    c.set(p + "levels", join_strings(covariates[i].levels));
    c.set(p + "probs", join_doubles(covariates[i].probs));
    c.set(p + "effects", join_doubles(covariates[i].effects));
  }
  for (std::size_t i = 0; i < fatigue.size(); ++i) {
    const std::string p = "fatigue." + std::to_string(i + 1) + ".";
    c.set(p + "column", fatigue[i].column);
    c.set(p + "level", fatigue[i].level);
    c.set(p + "gamma", fatigue[i].curve.gamma);
    c.set(p + "zeta", fatigue[i].curve.zeta);
    c.set(p + "eta", fatigue[i].curve.eta);
  }
  return c;
}

ScenarioConfig ScenarioConfig::from_config(const FlatConfig& config) {
  config.reject_unknown({"preset", "name", "waves", "panel_size", "recruitment", "retention", "intercept", "phi",
                         "contact_bands", "coarsen_child_ages", "seed", "age_effect.", "covariate.", "fatigue."});
  ScenarioConfig s = config.has("preset") ? preset(config.require("preset")) : ScenarioConfig{};
  s.name = config.get_string("name", s.name);
  s.waves = static_cast<int>(config.get_int("waves", s.waves));
  s.panel_size = static_cast<int>(config.get_int("panel_size", s.panel_size));
  if (auto v = config.get("recruitment")) s.recruitment = split_doubles("recruitment", *v);
  if (auto v = config.get("retention")) s.retention = split_doubles("retention", *v);
  s.intercept = config.get_double("intercept", s.intercept);
  s.phi = config.get_double("phi", s.phi);
  s.contact_bands = config.get_bool("contact_bands", s.contact_bands);
  s.coarsen_child_ages = config.get_bool("coarsen_child_ages", s.coarsen_child_ages);
  s.seed = static_cast<std::uint64_t>(config.get_int("seed", static_cast<long long>(s.seed)));
  s.age_effect.amplitude = config.get_double("age_effect.amplitude", s.age_effect.amplitude);
  s.age_effect.peak = config.get_double("age_effect.peak", s.age_effect.peak);
  s.age_effect.width = config.get_double("age_effect.width", s.age_effect.width);

  if (!config.keys_with_prefix("covariate.").empty()) {
    s.covariates.clear();
    for (int i = 1;; ++i) {
      const std::string p = "covariate." + std::to_string(i) + ".";
      if (!config.has(p + "column")) break;
      CategoricalTruth c;
      c.column = config.require(p + "column");
      c.levels = split(config.require(p + "levels"));
      c.probs = split_doubles(p + "probs", config.require(p + "probs"));
      c.effects = split_doubles(p + "effects", config.require(p + "effects"));
      s.covariates.push_back(std::move(c));
    }
  }
  if (!config.keys_with_prefix("fatigue.").empty()) {
    s.fatigue.clear();
    for (int i = 1;; ++i) {
      const std::string p = "fatigue." + std::to_string(i) + ".";
      if (!config.has(p + "gamma")) break;
      HillTruth h;
      h.column = config.get_string(p + "column", "");
      h.level = config.get_string(p + "level", "");
      h.curve.gamma = config.require_double(p + "gamma");
      h.curve.zeta = config.require_double(p + "zeta");
      h.curve.eta = config.require_double(p + "eta");
      s.fatigue.push_back(std::move(h));
    }
  }
  s.validate();
  return s;
}

SimulationResult simulate_panel(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 0x70616e656c);
  std::vector<CategoricalTruth> columns = cfg.covariates;
  auto has_column = [&](const char* name) {
    return std::any_of(columns.begin(), columns.end(), [&](const CategoricalTruth& c) { return c.column == name; });
  };
  if (!has_column(kSex)) columns.insert(columns.begin(), default_sex());
  if (!has_column(kHousehold)) columns.insert(columns.begin() + 1, default_household());

  const auto bands = CoarseBandSet::contact_default();
  std::uniform_int_distribution<int> age_dist(0, kMaxAge);
  std::uniform_int_distribution<int> day_dist(0, 13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Participant> active;
  int next_id = 1;
  auto recruit = [&](int count) {
    for (int k = 0; k < count; ++k) {
      Participant p;
      char id[16];
      std::snprintf(id, sizeof id, "P%06d", next_id++);
      p.id = id;
      p.age = age_dist(rng);
      p.log_base = cfg.intercept + cfg.age_effect(p.age);
      for (const auto& c : columns) {
        const std::size_t l = draw_level(c.probs, rng);
        p.levels[c.column] = c.levels[l];
        p.log_base += c.effects[l];
      }
      active.push_back(std::move(p));
    }
  };

  SimulationResult out;
  std::vector<double> lambda, lambda_free;
  std::vector<double> wave_sum(static_cast<std::size_t>(cfg.waves), 0.0), wave_free(wave_sum);
  std::vector<int> wave_n(static_cast<std::size_t>(cfg.waves), 0);
  for (int t = 0; t < cfg.waves; ++t) {
    if (t > 0) {
      const double keep = entry(cfg.retention, t);
      std::vector<Participant> kept;
      for (auto& p : active) {
        if (unit(rng) < keep) kept.push_back(std::move(p));
      }
      active = std::move(kept);
    }
    recruit(static_cast<int>(std::lround(entry(cfg.recruitment, t) * cfg.panel_size)));
    for (auto& p : active) {
      double fat = 0.0;
      for (const auto& f : cfg.fatigue) {
        if (f.column.empty() || p.levels.at(f.column) == f.level) fat += hill(f.curve, p.repeat);
      }
      const double lam_free = std::exp(p.log_base);
      const double lam = std::exp(p.log_base + fat);
      SurveyRecord r;
      r.participant_id = p.id;
      r.wave = t + 1;
      r.repeat = p.repeat;
      r.age = p.age;
      r.sex = p.levels.at(kSex);
      r.household_size = p.levels.at(kHousehold);
      for (const auto& c : columns) {
        if (c.column != kSex && c.column != kHousehold) r.covariates[c.column] = p.levels.at(c.column);
      }
      r.contacts = gamma_poisson(lam, cfg.phi, rng);
      r.report_date = 14 * t + day_dist(rng);
      if (cfg.contact_bands) {
        // Assortative split of the raw count across contact bands.
        std::vector<double> w;
        for (std::size_t k = 0; k < bands.size(); ++k) {
          const double d = bands.midpoints()[k] - p.age;
          w.push_back(bands[k].width() * (std::exp(-d * d / (2.0 * 15.0 * 15.0)) + 0.1));
        }
        std::vector<int> counts(bands.size(), 0);
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        for (int c = 0; c < r.contacts; ++c) ++counts[pick(rng)];
        r.contacts_by_band = counts;
      }
      apply_contact_cap(r, kDefaultContactCap);
      out.records.push_back(std::move(r));
      lambda.push_back(lam);
      lambda_free.push_back(lam_free);
      wave_sum[static_cast<std::size_t>(t)] += lam;
      wave_free[static_cast<std::size_t>(t)] += lam_free;
      ++wave_n[static_cast<std::size_t>(t)];
      ++p.repeat;
    }
  }
  out.lambda = Eigen::Map<Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  out.lambda_free = Eigen::Map<Eigen::VectorXd>(lambda_free.data(), static_cast<Eigen::Index>(lambda_free.size()));

  out.manifest = cfg.to_config();
  out.manifest.set("truth.records", static_cast<long long>(out.records.size()));
  for (int t = 0; t < cfg.waves; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const std::string p = "truth.wave." + std::to_string(t + 1) + ".";
    out.manifest.set(p + "records", static_cast<long long>(wave_n[i]));
    out.manifest.set(p + "mean_lambda", wave_n[i] ? wave_sum[i] / wave_n[i] : 0.0);
    out.manifest.set(p + "mean_lambda_free", wave_n[i] ? wave_free[i] / wave_n[i] : 0.0);
  }
  return out;
}

void write_simulation(const std::filesystem::path& dir, const SimulationResult& result, const ScenarioConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::ostringstream records;
  write_survey_csv(records, result.records, cfg.covariate_columns(), CoarseBandSet::contact_default(),
                   cfg.coarsen_child_ages);
  write_file_atomic(dir / "records.csv", records.str());

  std::ostringstream truth;
  truth << "participant_id,wave,repeat,lambda,lambda_free\n";
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    const auto k = static_cast<Eigen::Index>(i);
    truth << csv::join({r.participant_id, std::to_string(r.wave), std::to_string(r.repeat),
                        format_double(result.lambda[k]), format_double(result.lambda_free[k])})
          << '\n';
  }
  write_file_atomic(dir / "truth_lambda.csv", truth.str());
  write_file_atomic(dir / "truth.manifest", result.manifest.to_string());
}

// --------------------------------------------------------------------------
// BRC surfaces

BrcScenario BrcScenario::smooth_default(std::uint64_t seed) {
  BrcScenario s;
  s.seed = seed;
  s.beta0 = -15.4;
  s.f.resize(s.ages, s.ages);
  for (int a = 0; a < s.ages; ++a) {
    for (int b = 0; b < s.ages; ++b) {
      const double d = a - b;
      const double mid = 0.5 * (a + b) - 35.0;
      s.f(a, b) = -d * d / (2.0 * 10.0 * 10.0) + 0.4 * std::exp(-mid * mid / (2.0 * 20.0 * 20.0)) +
                  0.3 * std::exp(-(std::abs(d) - 30.0) * (std::abs(d) - 30.0) / (2.0 * 5.0 * 5.0));
    }
  }
  return s;
}

BrcSimulation simulate_brc_surface(const BrcScenario& scenario) {
  const int A = scenario.ages;
  if (A < 1 || A > static_cast<int>(scenario.population.ages())) throw ConfigError("age grid exceeds the population table");
  if (scenario.f.rows() != A || scenario.f.cols() != A) throw ConfigError("surface must be ages x ages");
  for (int a = 0; a < A; ++a) {
    for (int b = a + 1; b < A; ++b) {
      if (scenario.f(a, b) != scenario.f(b, a)) throw ConfigError("surface is not symmetric");
    }
  }
  if (!(scenario.nu > 0.0)) throw ConfigError("nu must be positive");
  if (!(scenario.missingness > 0.0 && scenario.missingness <= 1.0)) throw ConfigError("reported share must lie in (0, 1]");
  if (!(scenario.participants > 0.0)) throw ConfigError("participants must be positive");
  for (const auto& band : scenario.bands.bands()) {
    if (band.hi >= A) throw ConfigError("contact band exceeds the age grid");
  }

  Eigen::VectorXd P(A);
  for (int a = 0; a < A; ++a) P[a] = scenario.population.count(0, a) + scenario.population.count(1, a);

  BrcSimulation sim;
  sim.log_m.resize(A, A);
  sim.m.resize(A, A);
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < A; ++b) {
      sim.log_m(a, b) = scenario.beta0 + scenario.f(a, b) + std::log(P[b]);
      sim.m(a, b) = std::exp(scenario.beta0 + scenario.f(a, b)) * P[b];
    }
  }

  const auto C = static_cast<Eigen::Index>(scenario.bands.size());
  sim.expected_band = Eigen::MatrixXd::Zero(A, C);
  const double scale = scenario.participants * scenario.missingness;
  for (int a = 0; a < A; ++a) {
    for (Eigen::Index c = 0; c < C; ++c) {
      const auto& band = scenario.bands[static_cast<std::size_t>(c)];
      double sum = 0.0;
      for (int b = band.lo; b <= band.hi; ++b) sum += sim.m(a, b);
      sim.expected_band(a, c) = scale * sum;
    }
  }

  BrcData& data = sim.data;
  data.waves = 1;
  data.max_repeat = 0;
  data.ages = A;
  data.bands = scenario.bands;
  data.population = scenario.population;
  data.missingness = MissingnessTable(1, A, scenario.missingness);
  // m above sums both contact genders, so each cell uses ContactGender::any.
  Rng rng = make_rng(scenario.seed, 0x627263);
  for (int g = 0; g < 2; ++g) {
    for (int a = 0; a < A; ++a) {
      for (Eigen::Index c = 0; c < C; ++c) {
        BrcCell cell;
        cell.wave = 0;
        cell.repeat = 0;
        cell.age = a;
        cell.gender = g;
        cell.contact_gender = ContactGender::any;
        cell.band = static_cast<int>(c);
        cell.participants = scenario.participants;
        const double mean = sim.expected_band(a, c);
        cell.y = gamma_poisson(mean, mean / scenario.nu, rng);
        data.cells.push_back(cell);
      }
    }
  }
  return sim;
}

}  // namespace brc
