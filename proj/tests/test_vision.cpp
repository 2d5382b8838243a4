#include "figurelink/error.hpp"
#include "figurelink/vision.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace figurelink;
using namespace figurelink::vision;

namespace {

image::RasterImage blocks(int w, int h, const std::vector<Rect>& rects, std::uint8_t ink = 90) {
  image::RasterImage img(w, h, 1, 255);
  for (const auto& r : rects) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) img.set(x, y, static_cast<std::uint8_t>(ink + ((x * 7 + y * 13) % 60)));
    }
  }
  return img;
}

std::vector<Rect> rects_of(const std::vector<PanelBox>& panels) {
  std::vector<Rect> out;
  for (const auto& p : panels) out.push_back(p.rect);
  return out;
}

void expect_near(const std::vector<Rect>& got, const std::vector<Rect>& want, int tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i].x0, want[i].x0, tol) << i;
    EXPECT_NEAR(got[i].y0, want[i].y0, tol) << i;
    EXPECT_NEAR(got[i].x1, want[i].x1, tol) << i;
    EXPECT_NEAR(got[i].y1, want[i].y1, tol) << i;
  }
}

OcrBox box(int x0, int y0, const std::string& text, double conf = 0.9) { return {Rect{x0, y0, x0 + 12, y0 + 14}, text, conf}; }

PanelBox panel(int x0, int y0, int x1, int y1) { return {Rect{x0, y0, x1, y1}, 0.25}; }

}  // namespace

TEST(Geometry, IntersectAndIou) {
  const Rect a{0, 0, 10, 10};
  const Rect b{5, 5, 15, 15};
  EXPECT_EQ(intersect(a, b), (Rect{5, 5, 10, 10}));
  EXPECT_DOUBLE_EQ(iou(a, b), 25.0 / 175.0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Rect{20, 20, 30, 30}), 0.0);
}

TEST(SplitPanels, FourBlocks) {
  const std::vector<Rect> truth = {{10, 10, 190, 190}, {210, 10, 390, 190}, {10, 210, 190, 390}, {210, 210, 390, 390}};
  const auto panels = split_panels(blocks(400, 400, truth));
  expect_near(rects_of(panels), truth, 2);
  for (const auto& p : panels) EXPECT_NEAR(p.area_fraction, 180.0 * 180.0 / 160000.0, 0.01);
}

TEST(SplitPanels, SinglePhotograph) {
  const auto panels = split_panels(blocks(300, 200, {{0, 0, 300, 200}}));
  ASSERT_EQ(panels.size(), 1u);
  EXPECT_EQ(panels[0].rect, (Rect{0, 0, 300, 200}));
  EXPECT_DOUBLE_EQ(panels[0].area_fraction, 1.0);
}

TEST(SplitPanels, UnevenThreePanels) {
  const std::vector<Rect> truth = {{8, 6, 492, 180}, {8, 200, 230, 394}, {250, 200, 492, 394}};
  expect_near(rects_of(split_panels(blocks(500, 400, truth))), truth, 2);
}

TEST(SplitPanels, TinyImageIsOnePanel) {
  const auto panels = split_panels(image::RasterImage(12, 40, 1, 255));
  ASSERT_EQ(panels.size(), 1u);
  EXPECT_EQ(panels[0].rect, (Rect{0, 0, 12, 40}));
}

TEST(SplitPanels, NarrowGuttersDoNotCut) {
  const auto panels = split_panels(blocks(300, 200, {{0, 0, 147, 200}, {153, 0, 300, 200}}));
  EXPECT_EQ(panels.size(), 1u);
}

TEST(SplitPanels, SmallLeavesDropped) {
  // A 10x10 speck is below min_panel_frac.
  const auto panels = split_panels(blocks(400, 300, {{0, 0, 250, 300}, {300, 100, 310, 110}}));
  ASSERT_EQ(panels.size(), 1u);
  EXPECT_NEAR(panels[0].rect.x1, 250, 2);
}

TEST(SplitPanels, ConfigValidation) {
  SplitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.min_gutter_px = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.background_fraction = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.background_level = 300;
  EXPECT_THROW(c.validate(), Error);
}

TEST(SplitPanels, PartitionAndDeterminismOnGenerator) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    testsupport::CompoundParams params;
    params.channels = i % 2 == 0 ? 1 : 3;
    const auto fig = testsupport::make_compound(rng, params);
    const auto panels = split_panels(fig.image);
    EXPECT_EQ(rects_of(split_panels(fig.image)), rects_of(panels));
    long long area = 0;
    for (std::size_t a = 0; a < panels.size(); ++a) {
      const auto& r = panels[a].rect;
      EXPECT_TRUE(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= fig.image.width() && r.y1 <= fig.image.height() && !r.empty());
      area += r.area();
      for (std::size_t b = a + 1; b < panels.size(); ++b) EXPECT_TRUE(intersect(r, panels[b].rect).empty());
    }
    EXPECT_LE(area, static_cast<long long>(fig.image.width()) * fig.image.height());
    EXPECT_EQ(panels.size(), fig.panels.size()) << "figure " << i;
  }
}

TEST(SortReadingOrder, RowsThenColumns) {
  std::vector<PanelBox> p = {panel(200, 5, 300, 100), panel(0, 120, 100, 200), panel(0, 0, 100, 100)};
  sort_reading_order(p);
  EXPECT_EQ(rects_of(p), (std::vector<Rect>{{0, 0, 100, 100}, {200, 5, 300, 100}, {0, 120, 100, 200}}));
}

TEST(Ocr, ParseAndValidate) {
  const auto page = parse_ocr_json(R"({"image":"f1.ppm","boxes":[{"x0":1,"y0":2,"x1":9,"y1":12,"text":"A","conf":0.9}]})");
  EXPECT_EQ(page.image, "f1.ppm");
  ASSERT_EQ(page.boxes.size(), 1u);
  EXPECT_EQ(page.boxes[0].rect, (Rect{1, 2, 9, 12}));
  EXPECT_EQ(parse_ocr_json(to_json(page).dump()).boxes[0].text, "A");
  for (const char* bad : {"{", R"({"image":"x"})", R"({"image":"x","boxes":[{"x0":1}]})",
                          R"({"image":"x","boxes":[{"x0":5,"y0":0,"x1":2,"y1":3,"text":"A","conf":0.5}]})",
                          R"({"image":"x","boxes":[{"x0":0,"y0":0,"x1":2,"y1":3,"text":"","conf":0.5}]})",
                          R"({"image":"x","boxes":[{"x0":0,"y0":0,"x1":2,"y1":3,"text":"A","conf":1.5}]})"}) {
    try {
      parse_ocr_json(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedFile) << bad;
    }
  }
}

TEST(LabelBoxScore, Table) {
  EXPECT_EQ(label_box_score("A", "A"), kExactScore);
  EXPECT_EQ(label_box_score("A", "(a)"), kExactScore);
  EXPECT_EQ(label_box_score("B", "8"), kFuzzyScore);
  EXPECT_EQ(label_box_score("O", "0"), kFuzzyScore);
  EXPECT_EQ(label_box_score("I", "l"), kFuzzyScore);
  EXPECT_EQ(label_box_score("I", "1"), kFuzzyScore);
  EXPECT_EQ(label_box_score("S", "5"), kFuzzyScore);
  EXPECT_EQ(label_box_score("C", "("), kFuzzyScore);
  EXPECT_EQ(label_box_score("II", "11"), kFuzzyScore);
  EXPECT_EQ(label_box_score("A", "B"), 0.0);
  EXPECT_EQ(label_box_score("A", "Axis"), 0.0);
  EXPECT_EQ(label_box_score("A", ""), 0.0);
}

TEST(MatchBoxes, ExactAndFuzzy) {
  const auto r = match_labels_to_boxes({"A", "B"}, {box(0, 0, "A"), box(50, 0, "B")});
  ASSERT_EQ(r.matches.size(), 2u);
  EXPECT_EQ(r.matches.at("A").evidence, Evidence::OcrExact);
  EXPECT_EQ(r.matches.at("B").box_index, 1u);
  const auto f = match_labels_to_boxes({"B"}, {box(0, 0, "8")});
  EXPECT_EQ(f.matches.at("B").evidence, Evidence::OcrFuzzy);
  EXPECT_TRUE(f.deficit.empty());
}

TEST(MatchBoxes, SixLabelFixture) {
  // Hand-marked: D and F have no box, B was read as "8", "HE" and "50 µm" are stain and scale text.
  const std::vector<OcrBox> boxes = {box(300, 10, "E", 0.95), box(10, 10, "A", 0.97), box(160, 12, "8", 0.71),
                                     box(40, 60, "HE", 0.88),  box(10, 210, "c", 0.9),  box(90, 90, "50 µm", 0.6)};
  const auto r = match_labels_to_boxes({"A", "B", "C", "D", "E", "F"}, boxes);
  ASSERT_EQ(r.matches.size(), 4u);
  EXPECT_EQ(r.matches.at("A").box_index, 1u);
  EXPECT_EQ(r.matches.at("B").box_index, 2u);
  EXPECT_EQ(r.matches.at("B").evidence, Evidence::OcrFuzzy);
  EXPECT_EQ(r.matches.at("C").box_index, 4u);
  EXPECT_EQ(r.matches.at("E").box_index, 0u);
  EXPECT_EQ(r.deficit, (std::vector<std::string>{"D", "F"}));
}

TEST(MatchBoxes, EachBoxUsedOnce) {
  const auto r = match_labels_to_boxes({"A", "B"}, {box(0, 0, "A", 0.5), box(9, 9, "A", 0.8)});
  EXPECT_EQ(r.matches.at("A").box_index, 1u);
  EXPECT_EQ(r.deficit, (std::vector<std::string>{"B"}));
}

TEST(MatchPanels, Containment) {
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100), panel(120, 0, 220, 100)};
  const auto boxes = match_labels_to_boxes({"A", "B"}, {box(125, 5, "B"), box(5, 5, "A")});
  const auto r = match_labels_to_panels(boxes.matches, panels, {"A", "B"});
  ASSERT_EQ(r.assignments.size(), 2u);
  EXPECT_EQ(r.assignments[0].panel_index, 0u);
  EXPECT_EQ(r.assignments[1].panel_index, 1u);
  EXPECT_EQ(r.assignments[0].evidence, Evidence::OcrExact);
  EXPECT_TRUE(r.complete());
}

TEST(MatchPanels, ReadingOrderWithoutBoxes) {
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100), panel(120, 0, 220, 100)};
  const auto r = match_labels_to_panels({}, panels, {"A", "B"});
  ASSERT_EQ(r.assignments.size(), 2u);
  EXPECT_EQ(r.assignments[0].label, "A");
  EXPECT_EQ(r.assignments[0].panel_index, 0u);
  EXPECT_EQ(r.assignments[1].panel_index, 1u);
  EXPECT_EQ(r.assignments[1].evidence, Evidence::LayoutInferred);
  EXPECT_EQ(r.assignments[1].score, kInferredScore);
}

TEST(MatchPanels, GutterBoxAndMissingLabel) {
  // 2x2 grid with 20px gutters. B sits in the gutter above its panel, C has no box.
  const std::vector<PanelBox> panels = {panel(0, 20, 100, 120), panel(120, 20, 220, 120), panel(0, 140, 100, 240),
                                        panel(120, 140, 220, 240)};
  const std::vector<OcrBox> boxes = {box(4, 24, "A"), box(122, 2, "B"), box(124, 144, "D")};
  const std::vector<std::string> labels = {"A", "B", "C", "D"};
  const auto m = match_labels_to_boxes(labels, boxes);
  const auto r = match_labels_to_panels(m.matches, panels, labels);
  ASSERT_TRUE(r.complete());
  std::map<std::string, std::size_t> got;
  for (const auto& a : r.assignments) got[a.label] = a.panel_index;
  EXPECT_EQ(got, (std::map<std::string, std::size_t>{{"A", 0}, {"B", 1}, {"C", 2}, {"D", 3}}));
  EXPECT_EQ(r.assignments[2].evidence, Evidence::LayoutInferred);
  EXPECT_TRUE(r.unbound_panels.empty());
}

TEST(MatchPanels, ConflictGoesToHigherScore) {
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100), panel(120, 0, 220, 100)};
  // Both boxes fall inside panel 0; the exact reading wins and the fuzzy one falls through.
  const std::vector<OcrBox> boxes = {box(5, 5, "A"), box(40, 40, "8")};
  const auto m = match_labels_to_boxes({"A", "B"}, boxes);
  const auto r = match_labels_to_panels(m.matches, panels, {"A", "B"});
  ASSERT_EQ(r.assignments.size(), 2u);
  EXPECT_EQ(r.assignments[0].panel_index, 0u);
  EXPECT_EQ(r.assignments[1].panel_index, 1u);
  EXPECT_EQ(r.assignments[1].evidence, Evidence::LayoutInferred);
}

TEST(MatchPanels, UnreconcilableCounts) {
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100)};
  const auto r = match_labels_to_panels({}, panels, {"A", "B"});
  EXPECT_TRUE(r.assignments.empty());
  EXPECT_EQ(r.unresolved, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(r.unbound_panels, (std::vector<std::size_t>{0}));
}

TEST(MatchPanels, AnnotatedFixtureAccuracy) {
  const auto cases = testsupport::read_label_matching(testsupport::fixture("label_matching.json"));
  ASSERT_EQ(cases.size(), 60u);
  const auto score = testsupport::label_matching_accuracy(cases);
  EXPECT_GE(score.rate(), 0.95) << score.correct << "/" << score.total;
}

TEST(MatchPanels, BijectivityProperty) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    const auto c = testsupport::random_matching_case(rng);
    const auto m = match_labels_to_boxes(c.labels, c.boxes);
    const auto r = match_labels_to_panels(m.matches, c.panels, c.labels);
    std::string why;
    ASSERT_TRUE(testsupport::is_bijective(r, c.panels, c.labels, &why)) << why << " case " << i;
  }
}

namespace {

jats::FigurePair figure_pair(const std::string& caption) {
  return {std::string("11"), "PMC9", "f1", "PMC9/f1.ppm", caption};
}

}  // namespace

TEST(EmitPairs, FullyAssigned) {
  const auto split = captioner::split_caption("(A) Axial CT. (B) Coronal CT.");
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100), panel(120, 0, 220, 100)};
  const auto matching = match_labels_to_panels({}, panels, split.labels());
  captioner::Citance c;
  c.sentence = "See Fig. 1B.";
  c.label_refs = {"B"};
  const auto cit = captioner::split_citances({c}, split.labels());
  const auto out = emit_fine_grained_pairs(figure_pair("(A) Axial CT. (B) Coronal CT."), split, matching, cit, "crops");
  ASSERT_EQ(out.pairs.size(), 2u);
  EXPECT_TRUE(out.audit.empty());
  EXPECT_EQ(out.pairs[1].panel_path, std::filesystem::path("crops/PMC9_f1_B.ppm"));
  EXPECT_EQ(out.pairs[1].sub_caption, "Coronal CT.");
  EXPECT_EQ(out.pairs[1].citances, (std::vector<std::string>{"See Fig. 1B."}));
  EXPECT_TRUE(out.pairs[0].citances.empty());
  EXPECT_EQ(out.pairs[0].crop, (std::optional<Rect>(Rect{0, 0, 100, 100})));
  const auto j = to_json(out.pairs[1]);
  EXPECT_EQ(j["evidence"], "layout_inferred");
  EXPECT_EQ(j["label"], "B");
}

TEST(EmitPairs, UnlabeledFigureIsWhole) {
  const auto split = captioner::split_caption("Histology of the lesion.");
  const auto out = emit_fine_grained_pairs(figure_pair("Histology of the lesion."), split, {}, {}, "crops");
  ASSERT_EQ(out.pairs.size(), 1u);
  EXPECT_FALSE(out.pairs[0].label.has_value());
  EXPECT_FALSE(out.pairs[0].crop.has_value());
  EXPECT_EQ(out.pairs[0].panel_path, std::filesystem::path("PMC9/f1.ppm"));
  EXPECT_EQ(out.pairs[0].sub_caption, "Histology of the lesion.");
  EXPECT_EQ(out.pairs[0].evidence, Evidence::WholeFigure);
  EXPECT_TRUE(to_json(out.pairs[0])["label"].is_null());
}

TEST(EmitPairs, OneUnresolvedOfThree) {
  const std::string caption = "(A) One. (B) Two. (C) Three.";
  const auto split = captioner::split_caption(caption);
  const std::vector<PanelBox> panels = {panel(0, 0, 100, 100), panel(120, 0, 220, 100)};
  const auto m = match_labels_to_boxes(split.labels(), {box(5, 5, "A"), box(125, 5, "B")});
  const auto matching = match_labels_to_panels(m.matches, panels, split.labels());
  const auto out = emit_fine_grained_pairs(figure_pair(caption), split, matching, {}, "crops");
  EXPECT_EQ(out.pairs.size(), 2u);
  ASSERT_EQ(out.audit.size(), 1u);
  EXPECT_EQ(out.audit[0].label, "C");
  EXPECT_EQ(out.audit[0].reason, "unresolved_label");
}

TEST(EmitPairs, ConservationProperty) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto caption = testsupport::random_caption(rng);
    const auto split = captioner::split_caption(caption);
    auto c = testsupport::random_matching_case(rng);
    const auto labels = split.labels();
    const auto m = match_labels_to_boxes(labels, c.boxes);
    const auto matching = match_labels_to_panels(m.matches, c.panels, labels);
    const auto out = emit_fine_grained_pairs(figure_pair(caption), split, matching, {}, "crops");
    ASSERT_EQ(out.pairs.size() + out.audit.size(), std::max<std::size_t>(labels.size(), 1));
  }
}

TEST(PanelCropName, SafeCharacters) {
  EXPECT_EQ(panel_crop_name("PMC1", "f/1", "B"), "PMC1_f_1_B.ppm");
}
