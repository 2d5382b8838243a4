#include "figurelink/stats.hpp"

#include "figurelink/error.hpp"
#include "figurelink/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace figurelink::stats {

double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty sample");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

Percentiles percentiles(std::vector<double> samples) {
  Percentiles p;
  if (samples.empty()) return p;
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i < kPercentiles.size(); ++i) p.values[i] = percentile_sorted(samples, kPercentiles[i]);
  return p;
}

std::size_t caption_tokens(const std::string& caption) {
  return text::split_whitespace(caption).size();
}

std::vector<PairRow> read_pairs_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedFile, "cannot read " + path.string());
  std::vector<PairRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      rows.push_back({j.at("caption").get<std::string>(), j.at("image_path").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

StatsReport corpus_stats(const std::vector<PairRow>& pairs, const std::filesystem::path& images_root,
                         const image::DecoderRegistry& decoders) {
  StatsReport r;
  r.pairs = pairs.size();
  std::vector<double> tokens, widths, heights, min_sides;
  for (const auto& p : pairs) {
    const auto t = caption_tokens(p.caption);
    tokens.push_back(static_cast<double>(t));
    if (t <= kContextTokens) ++r.captions_le_256;
    const auto path = p.image_path.is_absolute() ? p.image_path : images_root / p.image_path;
    image::Dimensions d;
    try {
      d = decoders.probe(path);
    } catch (const Error&) {
      ++r.unreadable_images;
      continue;
    }
    ++r.images_measured;
    widths.push_back(d.width);
    heights.push_back(d.height);
    const int side = std::min(d.width, d.height);
    min_sides.push_back(side);
    if (side > kMinSideThreshold) ++r.images_min_side_gt_336;
  }
  r.caption_tokens = percentiles(std::move(tokens));
  r.image_width = percentiles(std::move(widths));
  r.image_height = percentiles(std::move(heights));
  r.image_min_side = percentiles(std::move(min_sides));
  if (r.pairs > 0) r.fraction_captions_le_256 = static_cast<double>(r.captions_le_256) / static_cast<double>(r.pairs);
  if (r.images_measured > 0) {
    r.fraction_min_side_gt_336 =
        static_cast<double>(r.images_min_side_gt_336) / static_cast<double>(r.images_measured);
  }
  return r;
}

namespace {

nlohmann::ordered_json to_json(const Percentiles& p) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kPercentiles.size(); ++i) {
    const std::string key = "p" + std::to_string(static_cast<int>(kPercentiles[i]));
    if (p.values[i]) {
      j[key] = *p.values[i];
    } else {
      j[key] = nullptr;
    }
  }
  return j;
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

}  // namespace

nlohmann::ordered_json to_json(const StatsReport& r) {
  nlohmann::ordered_json j;
  j["pairs"] = r.pairs;
  j["images_measured"] = r.images_measured;
  j["unreadable_images"] = r.unreadable_images;
  j["tokenizer"] = "whitespace";
  j["caption_tokens"] = to_json(r.caption_tokens);
  j["image_width"] = to_json(r.image_width);
  j["image_height"] = to_json(r.image_height);
  j["image_min_side"] = to_json(r.image_min_side);
  j["captions_le_256"] = r.captions_le_256;
  j["fraction_captions_le_256"] = optional_json(r.fraction_captions_le_256);
  j["images_min_side_gt_336"] = r.images_min_side_gt_336;
  j["fraction_min_side_gt_336"] = optional_json(r.fraction_min_side_gt_336);
  return j;
}

std::string to_table(const StatsReport& r) {
  std::ostringstream out;
  out << "pairs " << r.pairs << ", images measured " << r.images_measured << ", unreadable "
      << r.unreadable_images << "\n";
  out << "field            p5      p25     p50     p75     p95\n";
  auto row = [&](const char* name, const Percentiles& p) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-14s %7s %7s %7s %7s %7s\n", name, cell(p.values[0]).c_str(),
                  cell(p.values[1]).c_str(), cell(p.values[2]).c_str(), cell(p.values[3]).c_str(),
                  cell(p.values[4]).c_str());
    out << buf;
  };
  row("caption_tokens", r.caption_tokens);
  row("image_width", r.image_width);
  row("image_height", r.image_height);
  row("image_min_side", r.image_min_side);
  out << "captions <= 256 tokens: " << cell(r.fraction_captions_le_256 ? std::optional<double>(*r.fraction_captions_le_256 * 100) : std::nullopt)
      << "%\n";
  out << "images min side > 336: " << cell(r.fraction_min_side_gt_336 ? std::optional<double>(*r.fraction_min_side_gt_336 * 100) : std::nullopt)
      << "%\n";
  return out.str();
}

}  // namespace figurelink::stats
