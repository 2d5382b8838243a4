#pragma once

#include "figurelink/evaluate.hpp"
#include "figurelink/vision.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace figurelink::config {

inline constexpr int kConfigVersion = 1;

/// Flat "key = value" file; '#' starts a comment; blank lines ignored.
///
///     config_version = 1
///     workers = 4
///     split.background_level = 240
///     split.background_fraction = 0.98
///     split.max_line_variance = 625
///     split.min_gutter_px = 8
///     split.min_panel_frac = 0.02
///     label_patterns = data/label_patterns.v1.txt
///     label_patterns_version = 1
///     k_values = 1,5,10
///     ann.max_degree = 16
///     ann.ef_construction = 100
///     ann.ef_search = 64
///     ann.exhaustive = false
///
/// Effective values: command-line flag, then FIGURELINK_WORKERS (workers only), then the
/// file, then the defaults above.
struct PipelineConfig {
  int config_version = kConfigVersion;
  std::size_t workers = 1;
  vision::SplitConfig split;
  std::optional<std::filesystem::path> label_patterns;  // builtin grammar when absent
  int label_patterns_version = 1;
  std::vector<std::size_t> k_values = {1, 5, 10};
  evaluate::IndexParams ann;

  /// Throws Error(ConfigError).
  void validate() const;

  /// Canonical "key = value" lines in key order; the config hash covers these bytes.
  std::string canonical() const;
};

/// Throws Error(ConfigError) naming the key and line for unknown or repeated keys and bad values.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Applies one key; used by the parser and for command-line overrides.
void set_key(PipelineConfig& config, const std::string& key, const std::string& value);

/// All recognised keys, sorted.
const std::vector<std::string>& known_keys();

/// "1,5,10" -> {1, 5, 10}; strictly positive, strictly increasing.
std::vector<std::size_t> parse_k_values(const std::string& value);

/// FIGURELINK_WORKERS when set. Throws Error(ConfigError) when not a positive integer.
std::optional<std::size_t> env_workers();

}  // namespace figurelink::config
