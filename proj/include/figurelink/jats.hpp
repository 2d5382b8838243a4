#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace figurelink::jats {

/// Why a fig element did not become a FigureEntry.
enum class FigureSkipReason { NoGraphic, EmptyCaption, MissingId, DuplicateId };

std::string_view to_string(FigureSkipReason reason) noexcept;

struct FigureSkip {
  std::string fig_id;  // may be empty for MissingId
  FigureSkipReason reason;

  bool operator==(const FigureSkip&) const = default;
};

struct FigureEntry {
  std::string fig_id;
  std::optional<std::string> label_text;
  std::string caption;
  std::string graphic_ref;  // media filename stem
  std::optional<std::string> parent_id;  // enclosing fig or fig-group, when nested

  bool operator==(const FigureEntry&) const = default;
};

struct ArticleRecord {
  std::optional<std::string> pmid;
  std::string pmcid;
  std::vector<FigureEntry> figures;
  std::vector<std::string> body_paragraphs;
  std::vector<FigureSkip> skipped_figures;  // not part of the corpus line

  bool operator==(const ArticleRecord&) const = default;
};

/// Captions with fewer code points than this after normalization count as empty.
inline constexpr std::size_t kMinCaptionLength = 3;

/// Parses one article. Throws Error with MalformedXml, MissingPmcid or NoFigures.
/// Thread-safe: depends only on its input.
///
/// Consumed subset: article-id (pmid, pmc/pmcid) under front, every fig element
/// (nested figs flattened, parent id kept), and body p elements outside figs and tables.
/// Caption and paragraph text: markup stripped, block children separated by a space,
/// `alternatives` reduced to its first child, NFC, whitespace collapsed.
ArticleRecord parse_article(std::string_view xml_bytes);

/// parse_article without the NoFigures check, so skipped figures stay visible.
ArticleRecord read_article(std::string_view xml_bytes);

/// Minimal JATS rendering of a record; parse_article of the result reproduces the record
/// (skipped figures excepted).
std::string to_jats_xml(const ArticleRecord& record);

struct FigurePair {
  std::optional<std::string> pmid;
  std::string pmcid;
  std::string fig_id;
  std::filesystem::path image_path;
  std::string caption;

  bool operator==(const FigurePair&) const = default;
};

struct PairExtraction {
  std::vector<FigurePair> pairs;
  std::vector<std::string> unresolved;  // fig_ids whose graphic_ref was not in the media index
};

using MediaIndex = std::map<std::string, std::filesystem::path>;

PairExtraction extract_pairs(const ArticleRecord& record, const MediaIndex& media_index);

/// Filename stem without directories: "figs/img1.jpg" -> "img1".
std::string graphic_stem(std::string_view href);

}  // namespace figurelink::jats
