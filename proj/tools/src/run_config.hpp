#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "brc/config.hpp"
#include "brc/inference.hpp"
#include "brc/models.hpp"
#include "brc/simulator.hpp"

namespace brc::cli {

/// Values given on the command line. Unset members leave the config file (or
/// the built-in default) in charge.
struct Flags {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> data;
  std::optional<std::string> model;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> fit;
  std::optional<int> threads;
  bool strict = false;
};

/// Merged run settings: flags over the --config file over defaults.
struct RunConfig {
  std::string command;
  FlatConfig settings;
  bool strict = false;

  static RunConfig resolve(const std::string& command, const Flags& flags);

  std::uint64_t seed() const;
  int threads() const;

  /// Output directory (required).
  std::filesystem::path out() const;
  /// Existing input file or directory named by `key`; ConfigError when unset or missing.
  std::filesystem::path input(const std::string& key) const;
  std::optional<std::filesystem::path> optional_input(const std::string& key) const;

  /// Keys under `prefix` with the prefix removed.
  FlatConfig section(const std::string& prefix) const;

  ModelSpec model(const std::string& fallback_preset) const;
  SamplerConfig sampler() const;
  ScenarioConfig scenario() const;
};

FlatConfig section_of(const FlatConfig& config, const std::string& prefix);

SamplerConfig sampler_from_config(const FlatConfig& section, std::uint64_t seed, int threads);
/// Inverse of sampler_from_config (threads and seed excluded).
FlatConfig sampler_to_config(const SamplerConfig& cfg);

}  // namespace brc::cli
