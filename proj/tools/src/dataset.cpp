#include "dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "brc/error.hpp"
#include "run_config.hpp"

namespace brc::cli {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

namespace {

Coding coding_from(const FlatConfig& c, const std::string& key, Coding fallback) {
  if (!c.has(key)) return fallback;
  const auto v = c.require(key);
  if (v == "treatment") return Coding::treatment;
  if (v == "full") return Coding::full;
  throw ConfigError(key + " must be treatment or full");
}

std::string to_string(Coding c) { return c == Coding::full ? "full" : "treatment"; }

FeatureBlock make_block(const std::string& name, const std::vector<std::string>& columns, Coding coding,
                        std::span<const SurveyRecord> records) {
  FeatureBlock b;
  b.name = name;
  for (const auto& col : columns) b.features.emplace_back(col, observed_levels(records, col), coding);
  return b;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const FlatConfig& settings, bool fatigue_block_by_default) {
  const FlatConfig f = section_of(settings, "features.");
  f.reject_unknown({"u", "v", "w", "coding", "w_coding"});

  SurveySchema schema;
  schema.contact_cap = static_cast<int>(settings.get_int("contact_cap", kDefaultContactCap));
  if (schema.contact_cap < 0) throw ConfigError("contact_cap must be >= 0");
  const long long seed = settings.get_int("seed", 1);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  schema.seed = static_cast<std::uint64_t>(seed);
  auto loaded = load_survey_csv(path, schema);

  Dataset d;
  if (settings.has("waves")) {
    std::set<int> keep;
    for (const auto& w : split_list(settings.require("waves"))) {
      try {
        keep.insert(std::stoi(w));
      } catch (const std::exception&) {
        throw ConfigError("waves: '" + w + "' is not an integer");
      }
    }
    for (auto& r : loaded.records) {
      if (keep.count(r.wave)) d.records.push_back(std::move(r));
    }
  } else {
    d.records = std::move(loaded.records);
  }
  if (d.records.empty()) throw DataError("no records left in " + path.string());

  std::vector<std::string> u = f.has("u") ? split_list(f.require("u")) : std::vector<std::string>{"sex", "household_size"};
  std::vector<std::string> v;
  if (f.has("v")) {
    v = split_list(f.require("v"));
  } else {
    std::set<std::string> extra;
    for (const auto& r : d.records) {
      for (const auto& [k, value] : r.covariates) extra.insert(k);
    }
    v.assign(extra.begin(), extra.end());
  }
  std::vector<std::string> w;
  if (f.has("w")) {
    w = split_list(f.require("w"));
  } else if (fatigue_block_by_default) {
    w = u;
    w.insert(w.end(), v.begin(), v.end());
  }
  const Coding coding = coding_from(f, "coding", Coding::treatment);
  const Coding w_coding = coding_from(f, "w_coding", Coding::full);

  d.features.blocks.push_back(make_block("u", u, coding, d.records));
  d.features.blocks.push_back(make_block("v", v, coding, d.records));
  if (!w.empty()) d.features.blocks.push_back(make_block("w", w, w_coding, d.records));
  const auto design = build_design(d.records, d.features);
  d.data = IndividualData::from_records(d.records, design);

  d.resolved.set("features.u", join_list(u));
  d.resolved.set("features.v", join_list(v));
  d.resolved.set("features.w", join_list(w));
  d.resolved.set("features.coding", to_string(coding));
  d.resolved.set("features.w_coding", to_string(w_coding));
  d.resolved.set("contact_cap", static_cast<long long>(schema.contact_cap));
  d.resolved.set("seed", std::to_string(schema.seed));
  if (settings.has("waves")) d.resolved.set("waves", settings.require("waves"));
  return d;
}

std::vector<Eigen::Index> rows_where(const Dataset& d, const std::function<bool(const SurveyRecord&)>& keep) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    if (keep(d.records[i])) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

std::vector<int> waves_of(const Dataset& d) {
  std::set<int> w;
  for (const auto& r : d.records) w.insert(r.wave);
  return {w.begin(), w.end()};
}

}  // namespace brc::cli
