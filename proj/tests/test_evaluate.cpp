#include "figurelink/error.hpp"
#include "figurelink/evaluate.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

using namespace figurelink;
using namespace figurelink::evaluate;

namespace {

EmbeddingStore store(std::vector<std::string> ids, std::vector<std::vector<double>> rows, Modality m = Modality::Text) {
  const std::size_t d = rows.front().size();
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return EmbeddingStore(std::move(ids), d, std::move(v), m);
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::InvalidArgument;
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Store, NormalizesAndValidates) {
  const auto s = store({"a", "b"}, {{3, 4}, {0, 2}});
  EXPECT_DOUBLE_EQ(s.row(0)[0], 0.6);
  EXPECT_EQ(s.find("b"), std::optional<std::size_t>(1));
  EXPECT_EQ(s.find("z"), std::nullopt);
  EXPECT_EQ(code_of([] { store({"a", "a"}, {{1, 0}, {0, 1}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { store({"a"}, {{0, 0}}); }), ErrorCode::ZeroNormRow);
  EXPECT_EQ(code_of([] { store({"a"}, {{NAN, 1}}); }), ErrorCode::NonFiniteInput);
  EXPECT_EQ(code_of([] { EmbeddingStore({"a"}, 2, {1.0, 1.0}, Modality::Image, false); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { EmbeddingStore({"a", "b"}, 2, {1.0, 0.0}, Modality::Image); }), ErrorCode::InvalidArgument);
}

TEST(Emb, ByteLayout) {
  const auto s = store({"ab", "c"}, {{1, 0}, {0, 1}}, Modality::Image);
  const auto bytes = encode_emb(s);
  const std::vector<std::uint8_t> want = {'E', 'M', 'B', '1', 2, 0, 0, 0, 2, 0, 0, 0, 0,     // N, D, modality
                                          2,   0,   'a', 'b', 1, 0, 'c',                     // ids
                                          0,   0,   0x80, 0x3F, 0, 0, 0, 0,                 // 1.0f, 0.0f
                                          0,   0,   0,    0,    0, 0, 0x80, 0x3F};
  EXPECT_EQ(bytes, want);
  const auto back = decode_emb(bytes);
  EXPECT_EQ(back.ids(), s.ids());
  EXPECT_EQ(back.modality(), Modality::Image);
  EXPECT_EQ(vec(back.row(1)), vec(s.row(1)));
}

TEST(Emb, FileRoundTripAndErrors) {
  testsupport::TempDir dir;
  std::mt19937_64 rng(1);
  const auto s = testsupport::random_store(rng, 20, 7, Modality::Text);
  write_emb(s, dir / "x.emb");
  const auto back = read_emb(dir / "x.emb");
  ASSERT_EQ(back.size(), 20u);
  EXPECT_EQ(back.modality(), Modality::Text);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(back.row(i)[k], s.row(i)[k], 1e-6);
  }
  auto bytes = encode_emb(s);
  EXPECT_EQ(code_of([&] { decode_emb(std::span(bytes).first(bytes.size() - 1)); }), ErrorCode::MalformedFile);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_emb(bad); }), ErrorCode::MalformedFile);
  bad = bytes;
  bad[12] = 7;
  EXPECT_EQ(code_of([&] { decode_emb(bad); }), ErrorCode::MalformedFile);
  bytes.push_back(0);
  EXPECT_EQ(code_of([&] { decode_emb(bytes); }), ErrorCode::MalformedFile);
  EXPECT_EQ(code_of([&] { read_emb(dir / "missing.emb"); }), ErrorCode::MalformedFile);
}

TEST(ExactTopk, Examples) {
  const auto single = store({"t"}, {{1, 2}});
  EXPECT_EQ(exact_topk(single.row(0), single, 1).front().id, "t");
  const auto s = store({"a", "b", "c"}, {{0, 1, 0}, {0.9, std::sqrt(1 - 0.81), 0}, {0, 0, 1}});
  const std::vector<double> q = {1, 0, 0};
  const auto hits = exact_topk(q, s, 3);
  EXPECT_EQ(hits[0].id, "b");
  EXPECT_NEAR(hits[0].similarity, 0.9, 1e-12);
  EXPECT_EQ(hits[1].id, "a");  // tie at 0, ascending id
  EXPECT_EQ(hits[2].id, "c");
  EXPECT_EQ(code_of([&] { exact_topk(std::vector<double>{1, 0}, s, 1); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { exact_topk(q, s, 4); }), ErrorCode::InvalidArgument);
}

TEST(ExactTopk, MatchesFullSort) {
  std::mt19937_64 rng(2);
  const auto s = testsupport::random_store(rng, 100, 12, Modality::Text);
  const auto queries = testsupport::random_store(rng, 20, 12, Modality::Image, "q");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    EXPECT_EQ(exact_topk(queries.row(i), s, 10), testsupport::brute_topk(queries.row(i), s, 10));
    const auto all = exact_topk(queries.row(i), s, 100);
    for (std::size_t r = 1; r < all.size(); ++r) {
      EXPECT_TRUE(all[r - 1].similarity > all[r].similarity ||
                  (all[r - 1].similarity == all[r].similarity && all[r - 1].id < all[r].id));
    }
  }
}

TEST(GraphIndex, ExhaustiveEqualsExact) {
  std::mt19937_64 rng(3);
  const auto s = testsupport::random_store(rng, 300, 16, Modality::Text);
  IndexParams p;
  p.exhaustive = true;
  const GraphIndex index(s, p);
  const auto queries = testsupport::random_store(rng, 30, 16, Modality::Image, "q");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    EXPECT_EQ(ann_topk(queries.row(i), index, 10), exact_topk(queries.row(i), s, 10));
  }
  EXPECT_DOUBLE_EQ(candidate_recall(queries, s, index, 10), 1.0);
}

TEST(GraphIndex, DefaultRecall) {
  std::mt19937_64 rng(4);
  const auto targets = testsupport::random_store(rng, 1000, 32, Modality::Text);
  const auto queries = testsupport::noisy_copy(rng, targets, 0.3, Modality::Image);
  const GraphIndex index(targets, {});
  const double r = candidate_recall(queries, targets, index, 10);
  EXPECT_GE(r, 0.95);
  EXPECT_LE(r, 1.0);
  for (std::size_t n = 0; n < 1000; ++n) EXPECT_LE(index.degree(n), 2 * index.params().max_degree);
}

TEST(GraphIndex, KEqualsN) {
  std::mt19937_64 rng(5);
  const auto s = testsupport::random_store(rng, 50, 8, Modality::Text);
  const GraphIndex index(s, {});
  const auto q = testsupport::random_store(rng, 5, 8, Modality::Image, "q");
  EXPECT_DOUBLE_EQ(candidate_recall(q, s, index, 50), 1.0);
}

TEST(GraphIndex, NotBuilt) {
  const GraphIndex index;
  EXPECT_FALSE(index.built());
  EXPECT_EQ(code_of([&] { index.search(std::vector<double>{1.0}, 1); }), ErrorCode::IndexNotBuilt);
}

TEST(Recall, SinglePairAndIdentity) {
  const auto a = store({"p"}, {{1, 0}}, Modality::Image);
  const auto b = store({"p"}, {{0.2, 1}}, Modality::Text);
  const auto r = recall_at_k(a, b, identity_pairing(a), {1});
  EXPECT_EQ(r.forward.recall_at.at(1), 1.0);
  EXPECT_EQ(r.backward.recall_at.at(1), 1.0);
  EXPECT_EQ(r.forward.direction, "image_to_text");
  EXPECT_EQ(r.backward.direction, "text_to_image");

  std::mt19937_64 rng(6);
  const auto q = testsupport::random_store(rng, 50, 10, Modality::Image);
  const EmbeddingStore t(q.ids(), q.dim(), [&] {
    std::vector<double> v;
    for (std::size_t i = 0; i < q.size(); ++i) v.insert(v.end(), q.row(i).begin(), q.row(i).end());
    return v;
  }(), Modality::Text);
  EXPECT_EQ(recall_at_k(q, t, identity_pairing(q), {1}).forward.recall_at.at(1), 1.0);
}

TEST(Recall, DuplicateTextTieRule) {
  // p3's text duplicates p1's; the tie resolves to the smaller id, so p3 ranks second.
  const auto images = store({"p0", "p1", "p2", "p3"}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 0}}, Modality::Image);
  const auto texts = store({"p0", "p1", "p2", "p3"}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 0}}, Modality::Text);
  const auto r = recall_at_k(images, texts, identity_pairing(images), {1, 5});
  EXPECT_DOUBLE_EQ(r.forward.recall_at.at(1), 0.75);
  EXPECT_DOUBLE_EQ(r.backward.recall_at.at(1), 0.75);
  EXPECT_DOUBLE_EQ(r.forward.recall_at.at(5), 1.0);
  EXPECT_EQ(r.forward.ranks[3], std::optional<std::size_t>(2));
  EXPECT_EQ(testsupport::brute_rank(images.row(3), texts, "p3"), 2u);
}

TEST(Recall, MatchesOracleAndIsMonotone) {
  std::mt19937_64 rng(7);
  const auto q = testsupport::random_store(rng, 200, 16, Modality::Image);
  const auto t = testsupport::noisy_copy(rng, q, 0.9, Modality::Text);
  const std::vector<std::size_t> ks = {1, 2, 5, 10, 50};
  const auto r = recall_at_k(q, t, identity_pairing(q), ks);
  for (const auto* run : {&r.forward, &r.backward}) {
    const auto& from = run == &r.forward ? q : t;
    const auto& to = run == &r.forward ? t : q;
    std::map<std::size_t, std::size_t> within;
    for (std::size_t i = 0; i < from.size(); ++i) {
      const std::size_t rank = testsupport::brute_rank(from.row(i), to, from.id(i));
      EXPECT_EQ(run->ranks[i], std::optional<std::size_t>(rank));
      for (auto k : ks) within[k] += rank <= k ? 1 : 0;
    }
    double prev = 0.0;
    for (auto k : ks) {
      EXPECT_DOUBLE_EQ(run->recall_at.at(k), static_cast<double>(within[k]) / 200.0);
      EXPECT_GE(run->recall_at.at(k), prev);
      prev = run->recall_at.at(k);
    }
  }
}

TEST(Recall, PermutationInvariant) {
  std::mt19937_64 rng(8);
  const auto q = testsupport::random_store(rng, 60, 8, Modality::Image, "a");
  const auto t = testsupport::noisy_copy(rng, q, 1.0, Modality::Text);
  // Rename the targets and shuffle their rows; the pairing follows.
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> ids;
  std::vector<double> v;
  Pairing pairing;
  for (const auto i : perm) {
    ids.push_back("t" + q.id(i));
    v.insert(v.end(), t.row(i).begin(), t.row(i).end());
    pairing[q.id(i)] = "t" + q.id(i);
  }
  const EmbeddingStore shuffled(ids, 8, v, Modality::Text);
  const auto a = recall_at_k(q, t, identity_pairing(q), {1, 5, 10});
  const auto b = recall_at_k(q, shuffled, pairing, {1, 5, 10});
  EXPECT_EQ(a.forward.recall_at, b.forward.recall_at);
  EXPECT_EQ(a.backward.recall_at, b.backward.recall_at);
}

TEST(Recall, Errors) {
  const auto a = store({"p", "q"}, {{1, 0}, {0, 1}}, Modality::Image);
  const auto b = store({"p", "q"}, {{1, 0}, {0, 1}}, Modality::Text);
  EXPECT_EQ(code_of([&] { recall_at_k(a, b, {{"p", "p"}}, {1}); }), ErrorCode::MissingPair);
  EXPECT_EQ(code_of([&] { recall_at_k(a, b, {{"p", "p"}, {"q", "p"}}, {1}); }), ErrorCode::MissingPair);
  EXPECT_EQ(code_of([&] { recall_at_k(a, b, {{"p", "p"}, {"q", "zz"}}, {1}); }), ErrorCode::MissingPair);
  const auto c = store({"p", "q"}, {{1, 0, 0}, {0, 1, 0}}, Modality::Text);
  EXPECT_EQ(code_of([&] { recall_at_k(a, c, identity_pairing(a), {1}); }), ErrorCode::DimensionMismatch);
}

TEST(Recall, AnnMatchesExactWhenExhaustive) {
  std::mt19937_64 rng(9);
  const auto q = testsupport::random_store(rng, 120, 8, Modality::Image);
  const auto t = testsupport::noisy_copy(rng, q, 0.8, Modality::Text);
  IndexParams p;
  p.exhaustive = true;
  const GraphIndex fwd(t, p);
  const GraphIndex bwd(q, p);
  const auto exact = recall_at_k(q, t, identity_pairing(q), {1, 5, 10});
  const auto ann = recall_at_k(q, t, identity_pairing(q), {1, 5, 10}, &fwd, &bwd);
  EXPECT_EQ(exact.forward.recall_at, ann.forward.recall_at);
  EXPECT_EQ(exact.backward.recall_at, ann.backward.recall_at);
  const auto j = to_json(ann.forward);
  EXPECT_EQ(j["direction"], "image_to_text");
  EXPECT_EQ(j["queries"], 120);
  EXPECT_TRUE(j["recall"].contains("R@5"));
}

TEST(ZeroShot, Prompts) {
  EXPECT_EQ(render_prompt("a photo of {}", "pneumonia"), "a photo of pneumonia");
  EXPECT_THROW((ClassSpec{"x", {"no slot"}}.validate()), Error);
  EXPECT_THROW((ClassSpec{"x", {"{} and {}"}}.validate()), Error);
  EXPECT_THROW((ClassSpec{"x", {}}.validate()), Error);
  const auto pcam = benchmark_classes("pcam");
  ASSERT_EQ(pcam.size(), 2u);
  EXPECT_EQ(pcam[1].class_name, "lymph node metastasis");
  EXPECT_EQ(pcam[0].prompt_templates, (std::vector<std::string>{"this is an image of {}", "{} presented in image"}));
  EXPECT_EQ(benchmark_classes("lc25000_lung").size(), 3u);
  EXPECT_EQ(benchmark_classes("rsna")[0].prompt_templates[0], "a photo of {}");
  EXPECT_THROW(benchmark_classes("imagenet"), Error);
}

TEST(ZeroShot, IdentityAndTies) {
  const auto images = store({"i"}, {{1, 0}}, Modality::Image);
  const std::map<std::string, std::vector<double>> e = {{"x a", {1, 0}}, {"x b", {0, 1}}};
  const TextEmbedder embed = [&](const std::string& s) { return e.at(s); };
  const std::vector<ClassSpec> classes = {{"a", {"x {}"}}, {"b", {"x {}"}}};
  EXPECT_EQ(zero_shot_classify(images, classes, embed).predicted[0], 0u);
  const auto back = zero_shot_classify(store({"i"}, {{0, 1}}, Modality::Image), classes, embed);
  EXPECT_EQ(back.predicted[0], 1u);

  const TextEmbedder same = [](const std::string&) { return std::vector<double>{1, 1}; };
  std::mt19937_64 rng(10);
  const auto many = testsupport::random_store(rng, 10, 2, Modality::Image);
  const auto tied = zero_shot_classify(many, classes, same);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(tied.scores[i][0], tied.scores[i][1]);
    EXPECT_EQ(tied.predicted[i], 0u);
  }
}

TEST(ZeroShot, EmbedderFailures) {
  const auto images = store({"i"}, {{1, 0}}, Modality::Image);
  const std::vector<ClassSpec> classes = {{"a", {"{}"}}, {"b", {"{}"}}};
  EXPECT_EQ(code_of([&] { zero_shot_classify(images, classes, [](const std::string&) -> std::vector<double> {
              throw std::runtime_error("down");
            }); }),
            ErrorCode::EmbedderFailure);
  EXPECT_EQ(code_of([&] { zero_shot_classify(images, classes, [](const std::string&) { return std::vector<double>{1}; }); }),
            ErrorCode::EmbedderFailure);
  EXPECT_EQ(code_of([&] { zero_shot_classify(images, classes, [](const std::string&) { return std::vector<double>{0, 0}; }); }),
            ErrorCode::EmbedderFailure);
  EXPECT_EQ(code_of([&] { zero_shot_classify(images, {classes[0]}, [](const std::string&) { return std::vector<double>{1, 0}; }); }),
            ErrorCode::InvalidArgument);
}

TEST(ZeroShot, PlantedSetMatchesOracle) {
  std::mt19937_64 rng(11);
  const auto task = testsupport::make_planted_zero_shot(rng, 20, 6);
  const auto oracle = testsupport::oracle_zero_shot(task);
  const auto r = zero_shot_classify(task.images, task.classes, lookup_embedder(task.prompts), task.labels);
  EXPECT_EQ(r.predicted, oracle.predicted);
  EXPECT_EQ(r.accuracy, std::optional<double>(oracle.accuracy));
  EXPECT_EQ(r.auroc, std::optional<double>(oracle.auroc));
  EXPECT_LT(oracle.accuracy, 1.0);  // the planted overlap is real
  EXPECT_GT(oracle.accuracy, 0.5);
}

TEST(ZeroShot, ArgmaxScaleInvariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> c(1e-3, 1e3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + i % 9);
    for (auto& x : v) x = g(rng);
    if (i % 5 == 0) v.back() = v.front();
    const double k = c(rng);
    std::vector<double> w = v;
    for (auto& x : w) x *= k;
    EXPECT_EQ(argmax(v), argmax(w));
  }
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3}), 1u);
}

TEST(Auroc, RankBased) {
  const std::array<bool, 4> pos = {true, false, true, false};
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.1, 0.8, 0.2}, pos), std::optional<double>(1.0));
  EXPECT_EQ(auroc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, pos), std::optional<double>(0.0));
  EXPECT_EQ(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, pos), std::optional<double>(0.5));
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.9, 0.3, 0.1}, pos), std::optional<double>(0.625));
  EXPECT_EQ(auroc(std::vector<double>{1, 2}, std::array<bool, 2>{true, true}), std::nullopt);
}

TEST(Auroc, IncreasingTransformInvariance) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int it = 0; it < 100; ++it) {
    std::vector<double> s(30);
    std::array<bool, 30> p{};
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(g(rng) * 4.0) / 4.0;  // coarse values force ties
      p[i] = i % 3 == 0;
    }
    std::vector<double> t = s;
    for (auto& x : t) x = std::exp(2.0 * x) + 7.0;
    EXPECT_EQ(auroc(s, p), auroc(t, p));
  }
}

TEST(Census, Examples) {
  const std::vector<TaxonomyType> types = {{"mri", {"mri"}}, {"ct", {"ct"}}};
  const std::map<std::string, std::vector<double>> e = {{"mri", {1, 0, 0}}, {"ct", {0, 1, 0}}};
  const auto kws = embed_taxonomy(types, [&](const std::string& k) { return e.at(k); }, 3);
  const auto one = taxonomy_census(store({"i"}, {{1, 0, 0}}, Modality::Image), kws);
  EXPECT_EQ(one.front(), (std::pair<std::string, std::size_t>{"mri", 1}));
  const auto orth = taxonomy_census(store({"i", "j"}, {{0, 0, 1}, {0, 0, -1}}, Modality::Image), kws);
  EXPECT_EQ(orth, (std::vector<std::pair<std::string, std::size_t>>{{"mri", 2}, {"ct", 0}}));
}

TEST(Census, PlantedMixture) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 0.1);
  const std::vector<TaxonomyType> types = {{"microscopy", {"microscopy", "histology"}}, {"radiology", {"x-ray"}},
                                           {"chart", {"bar chart"}}};
  const std::map<std::string, std::vector<double>> e = {
      {"microscopy", {1, 0, 0, 0}}, {"histology", {0, 0, 0, 1}}, {"x-ray", {0, 1, 0, 0}}, {"bar chart", {0, 0, 1, 0}}};
  const auto kws = embed_taxonomy(types, [&](const std::string& k) { return e.at(k); }, 4);
  // 7 near microscopy, 5 near histology, 12 near x-ray, 6 near bar chart. Equal counts keep taxonomy order.
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  const std::vector<std::pair<std::string, int>> plant = {{"microscopy", 7}, {"histology", 5}, {"x-ray", 12}, {"bar chart", 6}};
  for (const auto& [kw, n] : plant) {
    for (int i = 0; i < n; ++i) {
      auto v = e.at(kw);
      for (auto& x : v) x += g(rng);
      ids.push_back(kw + std::to_string(i));
      rows.push_back(v);
    }
  }
  const auto census = taxonomy_census(store(ids, rows, Modality::Image), kws);
  EXPECT_EQ(census, (std::vector<std::pair<std::string, std::size_t>>{{"microscopy", 12}, {"radiology", 12}, {"chart", 6}}));
  std::size_t total = 0;
  for (const auto& [_, n] : census) total += n;
  EXPECT_EQ(total, 30u);
}

TEST(Census, TaxonomyParsing) {
  const auto t = parse_taxonomy(nlohmann::json::parse(R"([{"type_name":"mri","keywords":["mri","mr image"]}])"));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].keywords.size(), 2u);
  EXPECT_EQ(code_of([] { parse_taxonomy(nlohmann::json::parse(R"({"a":1})")); }), ErrorCode::MalformedFile);
  EXPECT_EQ(code_of([] { parse_taxonomy(nlohmann::json::parse(R"([{"type_name":"x","keywords":[]}])")); }),
            ErrorCode::MalformedFile);
}
