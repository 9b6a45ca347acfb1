#include "run_config.hpp"

#include "brc/error.hpp"

namespace brc::cli {

namespace {

const std::set<std::string> kTopLevelKeys = {
    "seed",      "threads",  "strict",  "data",     "out",     "fit",      "truth",     "waves",
    "contact_cap", "scenario.", "model.", "sampler.", "features.", "select.", "sequence.", "study.",
    "evaluate."};

void set_path(FlatConfig& c, const char* key, const std::optional<std::filesystem::path>& p) {
  if (p) c.set(key, p->string());
}

}  // namespace

FlatConfig section_of(const FlatConfig& config, const std::string& prefix) {
  FlatConfig out;
  for (const auto& key : config.keys_with_prefix(prefix)) out.set(key.substr(prefix.size()), config.require(key));
  return out;
}

RunConfig RunConfig::resolve(const std::string& command, const Flags& flags) {
  RunConfig rc;
  rc.command = command;
  FlatConfig file;
  if (flags.config) {
    if (!std::filesystem::is_regular_file(*flags.config)) {
      throw ConfigError("config file not found: " + flags.config->string());
    }
    file = FlatConfig::load(*flags.config);
    file.reject_unknown(kTopLevelKeys);
  }

  // A --model that names a file replaces the whole model section.
  const bool model_file = flags.model && std::filesystem::is_regular_file(*flags.model);
  for (const auto& [key, value] : file.entries()) {
    if (model_file && key.rfind("model.", 0) == 0) continue;
    rc.settings.set(key, value);
  }
  if (model_file) {
    for (const auto& [key, value] : FlatConfig::load(*flags.model).entries()) rc.settings.set("model." + key, value);
  } else if (flags.model) {
    rc.settings.set("model.preset", *flags.model);
  }
  if (flags.scenario) rc.settings.set("scenario.preset", *flags.scenario);
  if (flags.seed) rc.settings.set("seed", std::to_string(*flags.seed));
  if (flags.threads) rc.settings.set("threads", static_cast<long long>(*flags.threads));
  set_path(rc.settings, "out", flags.out);
  set_path(rc.settings, "data", flags.data);
  set_path(rc.settings, "truth", flags.truth);
  set_path(rc.settings, "fit", flags.fit);
  rc.strict = flags.strict || rc.settings.get_bool("strict", false);
  return rc;
}

std::uint64_t RunConfig::seed() const {
  const long long s = settings.get_int("seed", 1);
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int RunConfig::threads() const {
  const long long t = settings.get_int("threads", 0);
  if (t < 0) throw ConfigError("threads must be >= 0");
  return static_cast<int>(t);
}

std::filesystem::path RunConfig::out() const {
  if (!settings.has("out")) throw ConfigError(command + " needs --out");
  return settings.require("out");
}

std::filesystem::path RunConfig::input(const std::string& key) const {
  if (!settings.has(key)) throw ConfigError(command + " needs --" + key);
  auto p = optional_input(key);
  return *p;
}

std::optional<std::filesystem::path> RunConfig::optional_input(const std::string& key) const {
  if (!settings.has(key)) return std::nullopt;
  std::filesystem::path p = settings.require(key);
  if (!std::filesystem::exists(p)) throw ConfigError(key + " path not found: " + p.string());
  return p;
}

FlatConfig RunConfig::section(const std::string& prefix) const { return section_of(settings, prefix); }

ModelSpec RunConfig::model(const std::string& fallback_preset) const {
  FlatConfig m = section("model.");
  if (!m.has("preset") && !m.has("family")) m.set("preset", fallback_preset);
  return ModelSpec::from_config(m);
}

SamplerConfig sampler_from_config(const FlatConfig& c, std::uint64_t seed, int threads) {
  c.reject_unknown({"chains", "warmup", "sampling", "target_accept", "max_tree_depth", "init_radius", "metric"});
  SamplerConfig s;
  s.chains = static_cast<int>(c.get_int("chains", s.chains));
  s.warmup = static_cast<int>(c.get_int("warmup", s.warmup));
  s.sampling = static_cast<int>(c.get_int("sampling", s.sampling));
  s.target_accept = c.get_double("target_accept", s.target_accept);
  s.max_tree_depth = static_cast<int>(c.get_int("max_tree_depth", s.max_tree_depth));
  s.init_radius = c.get_double("init_radius", s.init_radius);
  const auto metric = c.get_string("metric", "diagonal");
  if (metric != "diagonal" && metric != "dense") throw ConfigError("sampler.metric must be diagonal or dense");
  s.metric = metric == "dense" ? MetricKind::dense : MetricKind::diagonal;
  s.seed = seed;
  s.threads = threads;
  s.validate();
  return s;
}

FlatConfig sampler_to_config(const SamplerConfig& s) {
  FlatConfig c;
  c.set("chains", static_cast<long long>(s.chains));
  c.set("warmup", static_cast<long long>(s.warmup));
  c.set("sampling", static_cast<long long>(s.sampling));
  c.set("target_accept", s.target_accept);
  c.set("max_tree_depth", static_cast<long long>(s.max_tree_depth));
  c.set("init_radius", s.init_radius);
  c.set("metric", std::string(s.metric == MetricKind::dense ? "dense" : "diagonal"));
  return c;
}

SamplerConfig RunConfig::sampler() const { return sampler_from_config(section("sampler."), seed(), threads()); }

ScenarioConfig RunConfig::scenario() const {
  FlatConfig s = section("scenario.");
  if (settings.has("seed")) s.set("seed", std::to_string(seed()));
  return ScenarioConfig::from_config(s);
}

}  // namespace brc::cli
