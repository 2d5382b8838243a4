#pragma once

#include "figurelink/captioner.hpp"
#include "figurelink/image.hpp"
#include "figurelink/jats.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace figurelink::vision {

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long long area() const noexcept { return static_cast<long long>(width()) * height(); }
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
  double center_x() const noexcept { return (x0 + x1) / 2.0; }
  double center_y() const noexcept { return (y0 + y1) / 2.0; }
  bool contains(double x, double y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  bool operator==(const Rect&) const = default;
};

Rect intersect(const Rect& a, const Rect& b) noexcept;
double iou(const Rect& a, const Rect& b) noexcept;

struct PanelBox {
  Rect rect;
  double area_fraction = 0.0;

  bool operator==(const PanelBox&) const = default;
};

/// Gutter-detection thresholds.
struct SplitConfig {
  int background_level = 240;        // intensity >= this counts as background
  double background_fraction = 0.98; // share of background pixels a gutter line needs
  double max_line_variance = 625.0;  // intensity variance allowed along a gutter line
  int min_gutter_px = 8;
  double min_panel_frac = 0.02;

  /// Throws Error(ConfigError) when a threshold is outside its documented range.
  void validate() const;
};

/// Recursive gutter cutting: trim background margins, cut on the widest interior band of
/// near-background lines (rows or columns) at least min_gutter_px wide, recurse into both
/// sides. Leaves smaller than min_panel_frac of the image are dropped. Images narrower or
/// shorter than 2*min_gutter_px come back as a single full-image panel.
/// Result is in reading order: rows of vertically overlapping panels top to bottom, each
/// row left to right.
std::vector<PanelBox> split_panels(const image::RasterImage& img, const SplitConfig& config = {});

/// Reading-order sort used by split_panels.
void sort_reading_order(std::vector<PanelBox>& panels);

struct OcrBox {
  Rect rect;
  std::string text;
  double confidence = 1.0;
};

struct OcrPage {
  std::string image;
  std::vector<OcrBox> boxes;
};

/// {"image": string, "boxes": [{"x0","y0","x1","y1","text","conf"}]}. Throws Error(MalformedFile).
OcrPage parse_ocr_json(std::string_view json_text);
OcrPage read_ocr_file(const std::filesystem::path& path);
nlohmann::json to_json(const OcrPage& page);

enum class Evidence { OcrExact, OcrFuzzy, LayoutInferred, WholeFigure };
std::string_view to_string(Evidence e) noexcept;

struct BoxMatch {
  std::size_t box_index = 0;
  OcrBox box;
  Evidence evidence = Evidence::OcrExact;
  double score = 0.0;
};

struct BoxMatchResult {
  std::map<std::string, BoxMatch> matches;
  std::vector<std::string> deficit;  // labels without a box, in input order
};

inline constexpr double kExactScore = 1.0;
inline constexpr double kFuzzyScore = 0.8;
inline constexpr std::size_t kMaxLabelTokenLength = 3;

/// Score of an OCR string as a reading of a canonical label: 1 for an exact match after
/// stripping punctuation and case, 0.8 when equal under the OCR confusion classes
/// {B,8} {O,0} {I,1,l} {S,5} {(,C}, 0 otherwise or when the token is longer than 3 characters.
double label_box_score(std::string_view label, std::string_view ocr_text);

/// Greedy best-score assignment; each box is used at most once.
BoxMatchResult match_labels_to_boxes(const std::vector<std::string>& labels, const std::vector<OcrBox>& boxes);

struct LabelAssignment {
  std::string label;
  std::size_t panel_index = 0;
  PanelBox panel;
  Evidence evidence = Evidence::OcrExact;
  double score = 0.0;
};

struct PanelMatchResult {
  std::vector<LabelAssignment> assignments;  // in label order
  std::vector<std::string> unresolved;       // labels left without a panel
  std::vector<std::size_t> unbound_panels;   // panels left without a label

  bool complete() const noexcept { return unresolved.empty(); }
};

inline constexpr double kInferredScore = 0.5;

/// Rule cascade:
///  1. a box centre inside exactly one panel binds its label to that panel;
///  2. a box centre outside every panel binds to the panel whose top-left corner is nearest,
///     if that panel is still free;
///  3. remaining labels map onto remaining panels in reading order when the counts agree.
/// Contested panels go to the higher score; the loser drops to the next rule.
PanelMatchResult match_labels_to_panels(const std::map<std::string, BoxMatch>& matches,
                                        const std::vector<PanelBox>& panels, const std::vector<std::string>& labels);

struct FinePair {
  std::string pmcid;
  std::string fig_id;
  std::optional<std::string> label;
  std::filesystem::path panel_path;
  std::optional<Rect> crop;  // absent for whole-figure pairs
  std::string sub_caption;
  std::vector<std::string> citances;
  Evidence evidence = Evidence::WholeFigure;
};

struct AuditEntry {
  std::string pmcid;
  std::string fig_id;
  std::string label;
  std::string reason;
};

struct FineGrainedOutput {
  std::vector<FinePair> pairs;
  std::vector<AuditEntry> audit;              // labels that produced no pair
  std::vector<std::size_t> orphan_panels;     // panels without a label
};

/// "{pmcid}_{fig_id}_{label}.ppm"
std::string panel_crop_name(const std::string& pmcid, const std::string& fig_id, const std::string& label);

/// One pair per assigned label, or a single whole-figure pair when the caption has no labels.
/// Invariant: pairs.size() + audit.size() == max(#labels, 1).
FineGrainedOutput emit_fine_grained_pairs(const jats::FigurePair& figure, const captioner::CaptionSplit& split,
                                          const PanelMatchResult& matching,
                                          const captioner::CitanceAssignment& citances,
                                          const std::filesystem::path& crop_dir);

nlohmann::ordered_json to_json(const FinePair& pair);

}  // namespace figurelink::vision
