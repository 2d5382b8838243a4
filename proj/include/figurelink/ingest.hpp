#pragma once

#include "figurelink/jats.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace figurelink::ingest {

/// An unpacked article directory, named after its PMCID ("PMC1234567").
struct ArticlePackage {
  std::filesystem::path package_path;
  std::string pmcid;
  bool has_xml = false;
  std::filesystem::path xml_path;                 // the first *.nxml, else *.xml, by name
  std::vector<std::filesystem::path> media_files;  // relative to package_path, sorted
};

/// True for directory names of the form PMC<digits>.
bool is_package_name(const std::string& name);

/// Every package directory below root, sorted by pmcid. Package directories are not
/// searched for nested packages.
/// Throws Error(RootNotFound), Error(PermissionDenied), Error(DuplicatePmcid).
std::vector<ArticlePackage> enumerate_packages(const std::filesystem::path& root);

/// OCR sidecars ("<stem>.ocr.json") travel with the images they describe and are not media.
inline constexpr std::string_view kOcrSuffix = ".ocr.json";

/// Filename stem -> media path. When stems collide the image formats win, in the order
/// ppm pgm pnm png jpg jpeg tif tiff gif, then the lexicographically first name.
jats::MediaIndex media_index(const ArticlePackage& package);

enum class SkipReason { MalformedXml, NoFigures, MissingMedia, EmptyCaption };
std::string_view to_string(SkipReason reason) noexcept;

struct SkipEntry {
  std::string pmcid;
  SkipReason reason;
  std::optional<std::string> fig_id;  // set for figure-level entries
  std::optional<std::string> detail;

  bool operator==(const SkipEntry&) const = default;
};

enum class ArticleStatus { Emitted, NoFigures, Malformed };

struct ArticleResult {
  std::string pmcid;  // of the package
  ArticleStatus status = ArticleStatus::Malformed;
  jats::ArticleRecord record;             // figures reduced to those with media
  std::vector<jats::FigurePair> pairs;
  std::vector<SkipEntry> skips;           // per figure, then one article entry when not emitted
};

/// Parses and resolves one package. Never throws: every failure becomes a skip entry.
///
/// Figure-level skips: no graphic and unresolved media -> missing_media; a caption shorter
/// than the minimum -> empty_caption; missing and duplicate ids -> malformed_xml.
/// Article-level: unreadable or malformed XML, missing pmcid or missing XML ->
/// malformed_xml; no usable figure -> no_figures, or missing_media when figures exist but
/// none has its image.
ArticleResult process_package(const ArticlePackage& package);

struct IngestOptions {
  std::filesystem::path out;                  // corpus JSONL
  std::filesystem::path skip_log;             // skip log JSONL
  std::optional<std::filesystem::path> pairs_out;  // FigurePair JSONL, image paths relative to root
  std::size_t workers = 1;
  /// Called once per article in output order, from the writing thread.
  std::function<void(const ArticleResult&)> on_article;
};

struct IngestReport {
  std::size_t articles_seen = 0;
  std::size_t articles_emitted = 0;
  std::size_t skipped_no_figures = 0;
  std::size_t skipped_malformed = 0;
  std::size_t pairs_emitted = 0;
  std::size_t figures_skipped = 0;  // figure-level skip entries
  double wall_time = 0.0;           // seconds

  bool consistent() const noexcept {
    return articles_emitted + skipped_no_figures + skipped_malformed == articles_seen &&
           pairs_emitted >= articles_emitted;
  }
};

/// Processes the packages on `workers` threads and writes results in package order, so the
/// output bytes do not depend on the worker count. Outputs are renamed into place when
/// complete. Throws Error(OutputUnwritable), Error(InvalidArgument) for workers == 0, and
/// enumeration errors; never per-article errors.
IngestReport run_pipeline(const std::filesystem::path& root, const IngestOptions& options);

/// Same over an explicit package list.
IngestReport run_packages(const std::vector<ArticlePackage>& packages, const std::filesystem::path& root,
                          const IngestOptions& options);

/// Runs fn(i) for i in [0, n) on `workers` threads; consume(i) is called on the calling
/// thread in ascending i as soon as result i is ready. At most `window` results are pending.
void ordered_parallel(std::size_t n, std::size_t workers, std::size_t window,
                      const std::function<void(std::size_t)>& fn, const std::function<void(std::size_t)>& consume);

/// {"pmid", "pmcid", "figures": [{"fig_id", "graphic_ref", "caption"}], "body_paragraphs"}
nlohmann::ordered_json corpus_json(const jats::ArticleRecord& record);
/// {"pmid", "pmcid", "fig_id", "image_path", "caption"}
nlohmann::ordered_json pair_json(const jats::FigurePair& pair, const std::filesystem::path& root);
/// {"pmcid", "reason"} plus "fig_id" and "detail" when present.
nlohmann::ordered_json skip_json(const SkipEntry& entry);
nlohmann::ordered_json to_json(const IngestReport& report, bool include_wall_time = true);

}  // namespace figurelink::ingest
