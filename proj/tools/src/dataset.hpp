#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "brc/config.hpp"
#include "brc/domain.hpp"
#include "brc/models.hpp"

namespace brc::cli {

/// Survey records with their design blocks u | v | w.
struct Dataset {
  std::vector<SurveyRecord> records;
  FeatureSpec features;
  IndividualData data;
  /// features.*, waves, contact_cap and seed as actually used; stored in fit
  /// manifests so that a later evaluate rebuilds the same design.
  FlatConfig resolved;
};

/// Reads `path` and builds the design from the `features.*`, `waves`,
/// `contact_cap` and `seed` keys of `settings`. With `fatigue_block_by_default`
/// an unset features.w takes every u and v column.
Dataset load_dataset(const std::filesystem::path& path, const FlatConfig& settings, bool fatigue_block_by_default);

std::vector<Eigen::Index> rows_where(const Dataset& d, const std::function<bool(const SurveyRecord&)>& keep);

/// Sorted distinct waves.
std::vector<int> waves_of(const Dataset& d);

std::vector<std::string> split_list(const std::string& text);
std::string join_list(const std::vector<std::string>& items);

}  // namespace brc::cli
