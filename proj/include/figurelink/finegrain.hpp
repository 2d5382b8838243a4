#pragma once

#include "figurelink/captioner.hpp"
#include "figurelink/image.hpp"
#include "figurelink/ingest.hpp"
#include "figurelink/vision.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace figurelink::finegrain {

struct FinegrainOptions {
  std::filesystem::path pairs_out;       // FinePair JSONL
  std::filesystem::path subcaptions_out; // sub-caption / citance JSONL
  std::filesystem::path audit_out;       // unresolved labels and orphan panels
  std::filesystem::path crops_dir;       // panel crops, created when missing
  std::size_t workers = 1;
  vision::SplitConfig split;
  const captioner::LabelGrammar* grammar = nullptr;  // builtin when null
};

struct FinegrainReport {
  std::size_t articles = 0;            // emitted by ingest
  std::size_t figures = 0;
  std::size_t labeled_figures = 0;
  std::size_t fine_pairs = 0;          // panel crops
  std::size_t whole_figure_pairs = 0;
  std::size_t subcaption_lines = 0;
  std::size_t citances = 0;
  std::size_t unknown_label_refs = 0;
  std::size_t unresolved_labels = 0;
  std::size_t orphan_panels = 0;
  std::size_t unreadable_images = 0;
  std::size_t ocr_pages = 0;
  std::size_t malformed_ocr = 0;  // sidecars that failed to parse; the figure is matched without OCR
};

/// OCR sidecar of an image: "<dir>/<stem>.ocr.json".
std::filesystem::path ocr_path_for(const std::filesystem::path& image_path);

struct FigureOutput {
  vision::FineGrainedOutput fine;
  std::vector<nlohmann::ordered_json> subcaption_lines;
  std::vector<vision::PanelBox> panels;
  bool labeled = false;
  bool unreadable = false;
  bool had_ocr = false;
  bool malformed_ocr = false;
  std::size_t unknown_label_refs = 0;
};

/// Caption split, citance assignment, panel split, OCR matching and pair emission for one
/// figure. Crops are written into crops_dir as RGB PPM. An unreadable image sends every
/// label to the audit with reason "unreadable_image".
FigureOutput process_figure(const jats::FigurePair& figure, const std::vector<captioner::Citance>& citances,
                            const FinegrainOptions& options, const image::DecoderRegistry& decoders);

/// Ingests every package under root and writes the three JSONL outputs in package order.
/// Whole-figure panel paths are written relative to root.
FinegrainReport run_finegrain(const std::filesystem::path& root, const FinegrainOptions& options);

nlohmann::ordered_json to_json(const FinegrainReport& report);

}  // namespace figurelink::finegrain
