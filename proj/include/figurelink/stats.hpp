#pragma once

#include "figurelink/image.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace figurelink::stats {

inline constexpr std::array<double, 5> kPercentiles = {5, 25, 50, 75, 95};
inline constexpr std::size_t kContextTokens = 256;
inline constexpr int kMinSideThreshold = 336;

/// p5/p25/p50/p75/p95, linear interpolation between closest ranks; all absent when empty.
struct Percentiles {
  std::array<std::optional<double>, 5> values;

  std::optional<double> p50() const { return values[2]; }
};

Percentiles percentiles(std::vector<double> samples);

/// Linearly interpolated q-th percentile (q in [0, 100]) of a sorted sample.
double percentile_sorted(const std::vector<double>& sorted, double q);

struct StatsReport {
  std::size_t pairs = 0;
  std::size_t images_measured = 0;
  std::size_t unreadable_images = 0;
  Percentiles caption_tokens;
  Percentiles image_width;
  Percentiles image_height;
  Percentiles image_min_side;
  std::optional<double> fraction_captions_le_256;   // over all pairs
  std::optional<double> fraction_min_side_gt_336;   // over measured images
  std::size_t captions_le_256 = 0;
  std::size_t images_min_side_gt_336 = 0;
};

struct PairRow {
  std::string caption;
  std::filesystem::path image_path;
};

/// Token count = number of whitespace-separated tokens.
std::size_t caption_tokens(const std::string& caption);

/// Reads pairs JSONL lines ({"caption", "image_path", ...}). Throws Error(MalformedFile) with
/// the line number.
std::vector<PairRow> read_pairs_jsonl(const std::filesystem::path& path);

/// Relative image paths resolve against images_root. Images that fail to decode are counted
/// in unreadable_images and excluded from the image statistics.
StatsReport corpus_stats(const std::vector<PairRow>& pairs, const std::filesystem::path& images_root,
                         const image::DecoderRegistry& decoders = {});

nlohmann::ordered_json to_json(const StatsReport& report);
std::string to_table(const StatsReport& report);

}  // namespace figurelink::stats
