#include "figurelink/finegrain.hpp"

#include "figurelink/error.hpp"
#include "figurelink/io.hpp"

#include <algorithm>
#include <optional>

namespace figurelink::finegrain {

namespace fs = std::filesystem;

namespace {

std::string line(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + "\n";
}

image::RasterImage to_rgb(const image::RasterImage& img) {
  if (img.channels() == 3) return img;
  std::vector<std::uint8_t> px;
  px.reserve(static_cast<std::size_t>(img.width()) * img.height() * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto v = img.at(x, y, 0);
      px.insert(px.end(), {v, v, v});
    }
  }
  return image::RasterImage(img.width(), img.height(), 3, std::move(px));
}

std::vector<captioner::Citance> subset(const std::vector<captioner::Citance>& all, const std::string& fig_id) {
  std::vector<captioner::Citance> out;
  for (const auto& c : all) {
    if (c.target_fig_id == fig_id) out.push_back(c);
  }
  return out;
}

bool any_figure_level(const captioner::CitanceAssignment& a, const std::string& key) {
  const auto it = a.figure_level.find(key);
  return it != a.figure_level.end() && std::find(it->second.begin(), it->second.end(), true) != it->second.end();
}

const std::vector<captioner::Citance>& citances_for(const captioner::CitanceAssignment& a, const std::string& key) {
  static const std::vector<captioner::Citance> kNone;
  const auto it = a.by_label.find(key);
  return it == a.by_label.end() ? kNone : it->second;
}

struct ArticleOutput {
  ingest::ArticleStatus status = ingest::ArticleStatus::Malformed;
  std::vector<FigureOutput> figures;
  std::vector<jats::FigurePair> pairs;
  std::size_t citances = 0;
};

}  // namespace

fs::path ocr_path_for(const fs::path& image_path) {
  return image_path.parent_path() / (image_path.stem().string() + std::string(ingest::kOcrSuffix));
}

FigureOutput process_figure(const jats::FigurePair& figure, const std::vector<captioner::Citance>& citances,
                            const FinegrainOptions& options, const image::DecoderRegistry& decoders) {
  const auto& grammar = options.grammar != nullptr ? *options.grammar : captioner::LabelGrammar::builtin();
  FigureOutput out;
  const auto split = captioner::split_caption(figure.caption, grammar);
  const auto labels = split.labels();
  out.labeled = !labels.empty();
  const auto assignment = captioner::split_citances(citances, labels);
  out.unknown_label_refs = assignment.unknown.size();

  if (!out.labeled) {
    out.subcaption_lines.push_back(captioner::subcaption_line(figure.pmcid, figure.fig_id, nullptr, figure.caption,
                                                              citances_for(assignment, ""),
                                                              any_figure_level(assignment, "")));
    out.fine = vision::emit_fine_grained_pairs(figure, split, {}, assignment, options.crops_dir);
    return out;
  }
  for (const auto& label : labels) {
    const auto part = std::find_if(split.parts.begin(), split.parts.end(),
                                   [&](const captioner::SubCaption& s) { return s.label == label; });
    out.subcaption_lines.push_back(captioner::subcaption_line(figure.pmcid, figure.fig_id, &label, part->text,
                                                              citances_for(assignment, label),
                                                              any_figure_level(assignment, label)));
  }

  std::optional<image::RasterImage> img;
  try {
    img = decoders.decode(figure.image_path);
  } catch (const Error&) {
    out.unreadable = true;
    for (const auto& label : labels) out.fine.audit.push_back({figure.pmcid, figure.fig_id, label, "unreadable_image"});
    return out;
  }
  out.panels = vision::split_panels(*img, options.split);

  std::vector<vision::OcrBox> boxes;
  const fs::path ocr = ocr_path_for(figure.image_path);
  std::error_code ec;
  if (fs::is_regular_file(ocr, ec)) {
    try {
      boxes = vision::read_ocr_file(ocr).boxes;
      out.had_ocr = true;
    } catch (const Error&) {
      out.malformed_ocr = true;
    }
  }
  const auto box_matches = vision::match_labels_to_boxes(labels, boxes);
  const auto matching = vision::match_labels_to_panels(box_matches.matches, out.panels, labels);
  out.fine = vision::emit_fine_grained_pairs(figure, split, matching, assignment, options.crops_dir);
  for (const auto& p : out.fine.pairs) {
    if (!p.crop) continue;
    const auto& r = *p.crop;
    const auto crop = to_rgb(img->crop(r.x0, r.y0, r.x1, r.y1));
    const auto bytes = image::encode_pnm(crop);
    io::write_atomic(p.panel_path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return out;
}

FinegrainReport run_finegrain(const fs::path& root, const FinegrainOptions& options) {
  if (options.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  options.split.validate();
  const auto packages = ingest::enumerate_packages(root);
  std::error_code ec;
  fs::create_directories(options.crops_dir, ec);
  if (!fs::is_directory(options.crops_dir, ec)) {
    throw Error(ErrorCode::OutputUnwritable, "cannot create " + options.crops_dir.string());
  }
  io::AtomicFile pairs_out(options.pairs_out);
  io::AtomicFile sub_out(options.subcaptions_out);
  io::AtomicFile audit_out(options.audit_out);
  const image::DecoderRegistry decoders;

  FinegrainReport report;
  std::vector<std::optional<ArticleOutput>> results(packages.size());
  ingest::ordered_parallel(
      packages.size(), options.workers, 4 * options.workers,
      [&](std::size_t i) {
        ArticleOutput a;
        auto r = ingest::process_package(packages[i]);
        a.status = r.status;
        if (r.status == ingest::ArticleStatus::Emitted) {
          const auto citances = captioner::extract_citances(r.record.body_paragraphs, r.record.figures);
          a.citances = citances.size();
          for (const auto& pair : r.pairs) {
            auto fig = process_figure(pair, subset(citances, pair.fig_id), options, decoders);
            a.figures.push_back(std::move(fig));
          }
          a.pairs = std::move(r.pairs);
        }
        results[i] = std::move(a);
      },
      [&](std::size_t i) {
        const ArticleOutput& a = *results[i];
        if (a.status == ingest::ArticleStatus::Emitted) ++report.articles;
        report.citances += a.citances;
        for (std::size_t f = 0; f < a.figures.size(); ++f) {
          const auto& fig = a.figures[f];
          const auto& src = a.pairs[f];
          ++report.figures;
          if (fig.labeled) ++report.labeled_figures;
          if (fig.unreadable) ++report.unreadable_images;
          if (fig.had_ocr) ++report.ocr_pages;
          if (fig.malformed_ocr) ++report.malformed_ocr;
          report.unknown_label_refs += fig.unknown_label_refs;
          for (const auto& l : fig.subcaption_lines) {
            sub_out.write(line(l));
            ++report.subcaption_lines;
          }
          for (auto p : fig.fine.pairs) {
            if (p.crop) {
              ++report.fine_pairs;
            } else {
              ++report.whole_figure_pairs;
              const auto rel = p.panel_path.lexically_relative(root);
              if (!rel.empty()) p.panel_path = rel;
            }
            pairs_out.write(line(vision::to_json(p)));
          }
          for (const auto& e : fig.fine.audit) {
            nlohmann::ordered_json j;
            j["pmcid"] = e.pmcid;
            j["fig_id"] = e.fig_id;
            j["label"] = e.label;
            j["reason"] = e.reason;
            audit_out.write(line(j));
            ++report.unresolved_labels;
          }
          for (const auto idx : fig.fine.orphan_panels) {
            const auto& r = fig.panels.at(idx).rect;
            nlohmann::ordered_json j;
            j["pmcid"] = src.pmcid;
            j["fig_id"] = src.fig_id;
            j["label"] = nullptr;
            j["reason"] = "orphan_panel";
            j["panel"] = {r.x0, r.y0, r.x1, r.y1};
            audit_out.write(line(j));
            ++report.orphan_panels;
          }
        }
        results[i].reset();
      });
  pairs_out.commit();
  sub_out.commit();
  audit_out.commit();
  return report;
}

nlohmann::ordered_json to_json(const FinegrainReport& r) {
  nlohmann::ordered_json j;
  j["articles"] = r.articles;
  j["figures"] = r.figures;
  j["labeled_figures"] = r.labeled_figures;
  j["fine_pairs"] = r.fine_pairs;
  j["whole_figure_pairs"] = r.whole_figure_pairs;
  j["subcaption_lines"] = r.subcaption_lines;
  j["citances"] = r.citances;
  j["unknown_label_refs"] = r.unknown_label_refs;
  j["unresolved_labels"] = r.unresolved_labels;
  j["orphan_panels"] = r.orphan_panels;
  j["unreadable_images"] = r.unreadable_images;
  j["ocr_pages"] = r.ocr_pages;
  j["malformed_ocr"] = r.malformed_ocr;
  return j;
}

}  // namespace figurelink::finegrain
