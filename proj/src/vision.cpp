#include "figurelink/vision.hpp"

#include "figurelink/error.hpp"
#include "figurelink/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace figurelink::vision {

Rect intersect(const Rect& a, const Rect& b) noexcept {
  Rect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  if (r.empty()) return {};
  return r;
}

double iou(const Rect& a, const Rect& b) noexcept {
  const long long inter = intersect(a, b).area();
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void SplitConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (background_level < 0 || background_level > 255) bad("split.background_level must be in [0,255]");
  if (!(background_fraction > 0.0 && background_fraction <= 1.0)) bad("split.background_fraction must be in (0,1]");
  if (!(max_line_variance >= 0.0)) bad("split.max_line_variance must be >= 0");
  if (min_gutter_px < 1 || min_gutter_px > 1000) bad("split.min_gutter_px must be in [1,1000]");
  if (!(min_panel_frac >= 0.0 && min_panel_frac < 1.0)) bad("split.min_panel_frac must be in [0,1)");
}

// ---------------------------------------------------------------------------
// Panel splitting

namespace {

class GutterCutter {
 public:
  GutterCutter(const image::RasterImage& img, const SplitConfig& cfg) : img_(img), cfg_(cfg) {
    const int w = img.width();
    const int h = img.height();
    intensity_.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) intensity_[static_cast<std::size_t>(y) * w + x] = img.intensity(x, y);
    }
  }

  void cut(const Rect& region, std::vector<Rect>& leaves) const {
    const Rect r = trim(region);
    if (r.empty()) return;
    const auto rows = line_flags(r, true);
    const auto cols = line_flags(r, false);
    const auto [row_start, row_len] = widest_band(rows);
    const auto [col_start, col_len] = widest_band(cols);
    const int best = std::max(row_len, col_len);
    if (best < cfg_.min_gutter_px) {
      leaves.push_back(r);
      return;
    }
    if (row_len >= col_len) {
      cut({r.x0, r.y0, r.x1, r.y0 + row_start}, leaves);
      cut({r.x0, r.y0 + row_start + row_len, r.x1, r.y1}, leaves);
    } else {
      cut({r.x0, r.y0, r.x0 + col_start, r.y1}, leaves);
      cut({r.x0 + col_start + col_len, r.y0, r.x1, r.y1}, leaves);
    }
  }

 private:
  double px(int x, int y) const noexcept { return intensity_[static_cast<std::size_t>(y) * img_.width() + x]; }

  bool is_gutter_line(const Rect& r, int at, bool row) const {
    const int n = row ? r.width() : r.height();
    int background = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int k = 0; k < n; ++k) {
      const double v = row ? px(r.x0 + k, at) : px(at, r.y0 + k);
      if (v >= cfg_.background_level) ++background;
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    return background >= cfg_.background_fraction * n && var <= cfg_.max_line_variance;
  }

  std::vector<bool> line_flags(const Rect& r, bool row) const {
    std::vector<bool> flags(static_cast<std::size_t>(row ? r.height() : r.width()));
    for (std::size_t i = 0; i < flags.size(); ++i) {
      flags[i] = is_gutter_line(r, (row ? r.y0 : r.x0) + static_cast<int>(i), row);
    }
    return flags;
  }

  Rect trim(Rect r) const {
    while (r.y0 < r.y1 && is_gutter_line(r, r.y0, true)) ++r.y0;
    while (r.y1 > r.y0 && is_gutter_line(r, r.y1 - 1, true)) --r.y1;
    if (r.empty()) return {};
    while (r.x0 < r.x1 && is_gutter_line(r, r.x0, false)) ++r.x0;
    while (r.x1 > r.x0 && is_gutter_line(r, r.x1 - 1, false)) --r.x1;
    if (r.empty()) return {};
    return r;
  }

  // Widest run of gutter lines; first one wins ties. Margins were trimmed, so runs are interior.
  static std::pair<int, int> widest_band(const std::vector<bool>& flags) {
    int best_start = 0;
    int best_len = 0;
    int i = 0;
    const int n = static_cast<int>(flags.size());
    while (i < n) {
      if (!flags[i]) {
        ++i;
        continue;
      }
      int j = i;
      while (j < n && flags[j]) ++j;
      if (j - i > best_len) {
        best_start = i;
        best_len = j - i;
      }
      i = j;
    }
    return {best_start, best_len};
  }

  const image::RasterImage& img_;
  const SplitConfig& cfg_;
  std::vector<double> intensity_;
};

}  // namespace

void sort_reading_order(std::vector<PanelBox>& panels) {
  std::sort(panels.begin(), panels.end(), [](const PanelBox& a, const PanelBox& b) {
    return std::tie(a.rect.y0, a.rect.x0) < std::tie(b.rect.y0, b.rect.x0);
  });
  std::vector<PanelBox> ordered;
  ordered.reserve(panels.size());
  std::size_t i = 0;
  while (i < panels.size()) {
    // A row: panels starting above the current row's shallowest bottom edge.
    int row_bottom = panels[i].rect.y1;
    std::size_t j = i + 1;
    while (j < panels.size() && panels[j].rect.y0 < row_bottom) {
      row_bottom = std::min(row_bottom, panels[j].rect.y1);
      ++j;
    }
    std::vector<PanelBox> row(panels.begin() + static_cast<std::ptrdiff_t>(i), panels.begin() + static_cast<std::ptrdiff_t>(j));
    std::sort(row.begin(), row.end(), [](const PanelBox& a, const PanelBox& b) {
      return std::tie(a.rect.x0, a.rect.y0) < std::tie(b.rect.x0, b.rect.y0);
    });
    ordered.insert(ordered.end(), row.begin(), row.end());
    i = j;
  }
  panels = std::move(ordered);
}

std::vector<PanelBox> split_panels(const image::RasterImage& img, const SplitConfig& config) {
  config.validate();
  const Rect full{0, 0, img.width(), img.height()};
  const double total = static_cast<double>(full.area());
  if (img.width() < 2 * config.min_gutter_px || img.height() < 2 * config.min_gutter_px) {
    return {PanelBox{full, 1.0}};
  }
  std::vector<Rect> leaves;
  GutterCutter(img, config).cut(full, leaves);
  std::vector<PanelBox> panels;
  for (const auto& r : leaves) {
    const double frac = static_cast<double>(r.area()) / total;
    if (frac >= config.min_panel_frac) panels.push_back({r, frac});
  }
  if (panels.empty()) return {PanelBox{full, 1.0}};
  sort_reading_order(panels);
  return panels;
}

// ---------------------------------------------------------------------------
// OCR interchange

OcrPage parse_ocr_json(std::string_view json_text) {
  OcrPage page;
  try {
    const auto j = nlohmann::json::parse(json_text);
    page.image = j.at("image").get<std::string>();
    for (const auto& b : j.at("boxes")) {
      OcrBox box;
      box.rect = {b.at("x0").get<int>(), b.at("y0").get<int>(), b.at("x1").get<int>(), b.at("y1").get<int>()};
      box.text = b.at("text").get<std::string>();
      box.confidence = b.contains("conf") ? b.at("conf").get<double>() : 1.0;
      if (box.rect.empty() || box.rect.x0 < 0 || box.rect.y0 < 0) {
        throw Error(ErrorCode::MalformedFile, "OCR box with empty or negative rectangle");
      }
      if (box.text.empty()) throw Error(ErrorCode::MalformedFile, "OCR box with empty text");
      if (!(box.confidence >= 0.0 && box.confidence <= 1.0)) {
        throw Error(ErrorCode::MalformedFile, "OCR confidence outside [0,1]");
      }
      page.boxes.push_back(std::move(box));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("OCR JSON: ") + e.what());
  }
  return page;
}

OcrPage read_ocr_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedFile, "cannot read OCR file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ocr_json(ss.str());
}

nlohmann::json to_json(const OcrPage& page) {
  nlohmann::json j;
  j["image"] = page.image;
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : page.boxes) {
    j["boxes"].push_back({{"x0", b.rect.x0}, {"y0", b.rect.y0}, {"x1", b.rect.x1}, {"y1", b.rect.y1},
                          {"text", b.text}, {"conf", b.confidence}});
  }
  return j;
}

std::string_view to_string(Evidence e) noexcept {
  switch (e) {
    case Evidence::OcrExact: return "ocr_exact";
    case Evidence::OcrFuzzy: return "ocr_fuzzy";
    case Evidence::LayoutInferred: return "layout_inferred";
    case Evidence::WholeFigure: return "whole_figure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Label-to-box matching

namespace {

bool is_punct(char c) {
  switch (c) {
    case '(': case ')': case '[': case ']': case '{': case '}':
    case '.': case ',': case ':': case ';': case '\'': case '"':
      return true;
    default:
      return false;
  }
}

std::string strip_punct(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (!is_punct(c) && !text::is_ascii_space(c)) out.push_back(c);
  }
  return text::to_upper_ascii(out);
}

char confusion_class(char c) {
  switch (c) {
    case '8': return 'B';
    case '0': return 'O';
    case '1': case 'L': case 'l': return 'I';
    case '5': return 'S';
    case '(': return 'C';
    default: return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
}

std::string confusion_map(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (!text::is_ascii_space(c)) out.push_back(confusion_class(c));
  }
  return out;
}

std::size_t code_point_count(std::string_view s) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < s.size()) {
    text::decode_utf8(s, pos);
    ++n;
  }
  return n;
}

}  // namespace

double label_box_score(std::string_view label, std::string_view ocr_text) {
  const std::string stripped = strip_punct(ocr_text);
  const std::string target = text::to_upper_ascii(label);
  if (!stripped.empty() && code_point_count(stripped) <= kMaxLabelTokenLength && stripped == target) return kExactScore;
  std::string compact;
  for (const char c : ocr_text) {
    if (!text::is_ascii_space(c)) compact.push_back(c);
  }
  if (compact.empty() || code_point_count(compact) > kMaxLabelTokenLength) return 0.0;
  const std::string mapped_label = confusion_map(target);
  const std::string strip_then_map = confusion_map(stripped);
  const std::string map_then_strip = strip_punct(confusion_map(compact));
  if (strip_then_map == mapped_label || map_then_strip == mapped_label) return kFuzzyScore;
  return 0.0;
}

BoxMatchResult match_labels_to_boxes(const std::vector<std::string>& labels, const std::vector<OcrBox>& boxes) {
  struct Candidate {
    std::size_t label;
    std::size_t box;
    double score;
  };
  std::vector<Candidate> cands;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const double s = label_box_score(labels[l], boxes[b].text);
      if (s > 0.0) cands.push_back({l, b, s});
    }
  }
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (boxes[a.box].confidence != boxes[b.box].confidence) return boxes[a.box].confidence > boxes[b.box].confidence;
    if (a.label != b.label) return a.label < b.label;
    return a.box < b.box;
  });
  std::vector<bool> label_used(labels.size(), false);
  std::vector<bool> box_used(boxes.size(), false);
  BoxMatchResult out;
  for (const auto& c : cands) {
    if (label_used[c.label] || box_used[c.box]) continue;
    label_used[c.label] = box_used[c.box] = true;
    out.matches[labels[c.label]] = {c.box, boxes[c.box], c.score >= kExactScore ? Evidence::OcrExact : Evidence::OcrFuzzy,
                                    c.score};
  }
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (!label_used[l]) out.deficit.push_back(labels[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label-to-panel matching

PanelMatchResult match_labels_to_panels(const std::map<std::string, BoxMatch>& matches,
                                        const std::vector<PanelBox>& panels, const std::vector<std::string>& labels) {
  std::vector<std::optional<std::size_t>> owner(panels.size());  // panel -> label index
  std::vector<std::optional<LabelAssignment>> bound(labels.size());

  struct Claim {
    std::size_t label;
    std::size_t panel;
    const BoxMatch* match;
  };
  auto by_score = [](const Claim& a, const Claim& b) {
    if (a.match->score != b.match->score) return a.match->score > b.match->score;
    return a.label < b.label;
  };
  auto bind = [&](const Claim& c, Evidence ev, double score) {
    owner[c.panel] = c.label;
    bound[c.label] = LabelAssignment{labels[c.label], c.panel, panels[c.panel], ev, score};
  };

  // Rule 1: containment.
  std::vector<Claim> inside;
  std::vector<std::size_t> outside;  // label indices whose box centre lies in no panel
  for (std::size_t l = 0; l < labels.size(); ++l) {
    const auto it = matches.find(labels[l]);
    if (it == matches.end()) continue;
    const double cx = it->second.box.rect.center_x();
    const double cy = it->second.box.rect.center_y();
    std::vector<std::size_t> hits;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      if (panels[p].rect.contains(cx, cy)) hits.push_back(p);
    }
    if (hits.size() == 1) {
      inside.push_back({l, hits.front(), &it->second});
    } else {
      outside.push_back(l);
    }
  }
  std::stable_sort(inside.begin(), inside.end(), by_score);
  std::vector<Claim> fallen;
  for (const auto& c : inside) {
    if (owner[c.panel]) {
      fallen.push_back(c);
    } else {
      bind(c, c.match->evidence, c.match->score);
    }
  }

  // Rule 2: gutter boxes and rule-1 losers go to the nearest top-left corner.
  std::vector<Claim> gutter;
  for (const auto l : outside) gutter.push_back({l, 0, &matches.at(labels[l])});
  gutter.insert(gutter.end(), fallen.begin(), fallen.end());
  std::stable_sort(gutter.begin(), gutter.end(), by_score);
  for (auto& c : gutter) {
    if (panels.empty()) break;
    const double cx = c.match->box.rect.center_x();
    const double cy = c.match->box.rect.center_y();
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_panel = 0;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      const double d = std::hypot(panels[p].rect.x0 - cx, panels[p].rect.y0 - cy);
      if (d < best) {
        best = d;
        best_panel = p;
      }
    }
    if (!owner[best_panel]) {
      c.panel = best_panel;
      bind(c, c.match->evidence, c.match->score);
    }
  }

  // Rule 3: reading-order inference when the leftovers pair up exactly.
  std::vector<std::size_t> free_labels;
  std::vector<std::size_t> free_panels;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (!bound[l]) free_labels.push_back(l);
  }
  for (std::size_t p = 0; p < panels.size(); ++p) {
    if (!owner[p]) free_panels.push_back(p);
  }
  if (!free_labels.empty() && free_labels.size() == free_panels.size()) {
    for (std::size_t k = 0; k < free_labels.size(); ++k) {
      const std::size_t l = free_labels[k];
      const std::size_t p = free_panels[k];
      owner[p] = l;
      bound[l] = LabelAssignment{labels[l], p, panels[p], Evidence::LayoutInferred, kInferredScore};
    }
    free_labels.clear();
    free_panels.clear();
  }

  PanelMatchResult out;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (bound[l]) {
      out.assignments.push_back(*bound[l]);
    } else {
      out.unresolved.push_back(labels[l]);
    }
  }
  for (std::size_t p = 0; p < panels.size(); ++p) {
    if (!owner[p]) out.unbound_panels.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fine-grained pairs

namespace {

std::string filename_safe(std::string_view s) {
  std::string out;
  for (const char c : s) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '.' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

std::vector<std::string> sentences_for(const captioner::CitanceAssignment& citances, const std::string& key) {
  std::vector<std::string> out;
  const auto it = citances.by_label.find(key);
  if (it == citances.by_label.end()) return out;
  for (const auto& c : it->second) out.push_back(c.sentence);
  return out;
}

}  // namespace

std::string panel_crop_name(const std::string& pmcid, const std::string& fig_id, const std::string& label) {
  return filename_safe(pmcid) + "_" + filename_safe(fig_id) + "_" + filename_safe(label) + ".ppm";
}

FineGrainedOutput emit_fine_grained_pairs(const jats::FigurePair& figure, const captioner::CaptionSplit& split,
                                          const PanelMatchResult& matching,
                                          const captioner::CitanceAssignment& citances,
                                          const std::filesystem::path& crop_dir) {
  FineGrainedOutput out;
  const auto labels = split.labels();
  if (labels.empty()) {
    FinePair p;
    p.pmcid = figure.pmcid;
    p.fig_id = figure.fig_id;
    p.panel_path = figure.image_path;
    p.sub_caption = figure.caption;
    p.citances = sentences_for(citances, "");
    p.evidence = Evidence::WholeFigure;
    out.pairs.push_back(std::move(p));
    return out;
  }
  for (const auto& label : labels) {
    const auto a = std::find_if(matching.assignments.begin(), matching.assignments.end(),
                                [&](const LabelAssignment& x) { return x.label == label; });
    if (a == matching.assignments.end()) {
      out.audit.push_back({figure.pmcid, figure.fig_id, label, "unresolved_label"});
      continue;
    }
    const auto part = std::find_if(split.parts.begin(), split.parts.end(),
                                   [&](const captioner::SubCaption& s) { return s.label == label; });
    FinePair p;
    p.pmcid = figure.pmcid;
    p.fig_id = figure.fig_id;
    p.label = label;
    p.panel_path = crop_dir / panel_crop_name(figure.pmcid, figure.fig_id, label);
    p.crop = a->panel.rect;
    p.sub_caption = part != split.parts.end() ? part->text : std::string();
    p.citances = sentences_for(citances, label);
    p.evidence = a->evidence;
    out.pairs.push_back(std::move(p));
  }
  out.orphan_panels = matching.unbound_panels;
  return out;
}

nlohmann::ordered_json to_json(const FinePair& pair) {
  nlohmann::ordered_json j;
  j["pmcid"] = pair.pmcid;
  j["fig_id"] = pair.fig_id;
  j["label"] = pair.label ? nlohmann::ordered_json(*pair.label) : nlohmann::ordered_json(nullptr);
  j["panel_path"] = pair.panel_path.generic_string();
  j["sub_caption"] = pair.sub_caption;
  j["citances"] = pair.citances;
  j["evidence"] = std::string(to_string(pair.evidence));
  return j;
}

}  // namespace figurelink::vision
