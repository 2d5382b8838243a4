#include "figurelink/cli.hpp"
#include "figurelink/config.hpp"
#include "figurelink/evaluate.hpp"
#include "figurelink/io.hpp"

#include "test_support.hpp"

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

using namespace figurelink;
using testsupport::TempDir;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "figurelink");
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

int run_binary(const std::string& args) {
  const std::string cmd = "'" + testsupport::cli_path().string() + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_hash(std::size_t workers) {
  config::PipelineConfig c;
  c.workers = workers;
  return io::sha256_hex(c.canonical());
}

std::string s(const fs::path& p) { return p.string(); }

}  // namespace

TEST(Cli, HelpVersionAndUsage) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"ingest", "--help"}).code, 0);
  const auto version = run_cli({"--version"});
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.out.find(cli::kToolVersion), std::string::npos);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"stats"}).code, 2);
  EXPECT_EQ(run_cli({"stats", "--pairs", "/does/not/exist.jsonl"}).code, 2);
}

TEST(Cli, BinaryExitCodes) {
  TempDir tmp;
  testsupport::spit(tmp / "bad.conf", "workers = 2\nsplit.gutter = 3\n");
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("stats"), 2);
  EXPECT_EQ(run_binary("stats --config '" + s(tmp / "bad.conf") + "' --pairs '" +
                       s(testsupport::fixture("stats3/pairs.jsonl")) + "' --manifest '" + s(tmp / "m.json") + "'"),
            2);
}

TEST(Cli, StatsOnFixture) {
  TempDir tmp;
  const auto r = run_cli({"stats", "--pairs", s(testsupport::fixture("stats3/pairs.jsonl")), "--out",
                          s(tmp / "report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(testsupport::slurp(tmp / "report.json"));
  EXPECT_EQ(j["pairs"], 3);
  EXPECT_EQ(j["images_measured"], 3);
  EXPECT_EQ(j["unreadable_images"], 0);
  EXPECT_EQ(j["tokenizer"], "whitespace");
  EXPECT_EQ(j["captions_le_256"], 3);
  EXPECT_EQ(j["images_min_side_gt_336"], 1);
  const auto manifest = json::parse(testsupport::slurp(tmp / "report.json.manifest.json"));
  EXPECT_EQ(manifest["tool"], "figurelink");
  EXPECT_EQ(manifest["command"], "stats");
  EXPECT_EQ(manifest["config_hash"], config_hash(1));
  EXPECT_EQ(manifest["inputs"]["pairs"], io::sha256_file(testsupport::fixture("stats3/pairs.jsonl")));
  EXPECT_EQ(manifest["outputs"]["report"], io::sha256_file(tmp / "report.json"));

  const auto pretty = run_cli({"stats", "--pairs", s(testsupport::fixture("stats3/pairs.jsonl")), "--pretty",
                               "--manifest", s(tmp / "m2.json")});
  ASSERT_EQ(pretty.code, 0) << pretty.err;
  EXPECT_FALSE(pretty.out.empty());
  EXPECT_THROW(json::parse(pretty.out), json::parse_error);
}

TEST(Cli, UnknownConfigKeyIsExit2) {
  TempDir tmp;
  testsupport::spit(tmp / "bad.conf", "workers = 2\nsplit.gutter = 3\n");
  const auto r = run_cli({"stats", "--config", s(tmp / "bad.conf"), "--pairs",
                          s(testsupport::fixture("stats3/pairs.jsonl")), "--manifest", s(tmp / "m.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("split.gutter"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, RefusesToOverwriteInputs) {
  TempDir tmp;
  const fs::path pairs = tmp / "pairs.jsonl";
  fs::copy_file(testsupport::fixture("stats3/pairs.jsonl"), pairs);
  const std::string before = testsupport::slurp(pairs);
  const auto r = run_cli({"stats", "--pairs", s(pairs), "--images-root", s(testsupport::fixture("stats3")), "--out",
                          s(pairs), "--manifest", s(tmp / "m.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(testsupport::slurp(pairs), before);
}

TEST(Cli, IngestManifestIsReproducible) {
  TempDir tmp;
  const std::string root = s(testsupport::fixture("corpus"));
  auto ingest = [&](const std::string& dir, const std::string& workers) {
    fs::create_directories(tmp / dir);
    return run_cli({"ingest", "--root", root, "--out", s(tmp / dir / "corpus.jsonl"), "--skip-log",
                    s(tmp / dir / "skips.jsonl"), "--pairs", s(tmp / dir / "pairs.jsonl"), "--workers", workers});
  };
  const auto a = ingest("a", "2");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = ingest("b", "2");
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string ma = testsupport::slurp(tmp / "a" / "corpus.jsonl.manifest.json");
  EXPECT_EQ(ma, testsupport::slurp(tmp / "b" / "corpus.jsonl.manifest.json"));
  const auto m = json::parse(ma);
  EXPECT_EQ(m["command"], "ingest");
  EXPECT_EQ(m["inputs"]["root"], cli::tree_digest(root));
  EXPECT_EQ(m["counters"]["articles_seen"], 25);
  EXPECT_FALSE(m["counters"].contains("wall_time"));
  EXPECT_EQ(m["config_hash"], config_hash(2));

  const auto report = json::parse(a.out);
  EXPECT_EQ(report["articles_emitted"], 16);
  EXPECT_EQ(report["pairs_emitted"], 24);
  EXPECT_TRUE(report.contains("wall_time"));

  // outputs do not depend on the worker count
  const auto c = ingest("c", "8");
  ASSERT_EQ(c.code, 0) << c.err;
  const auto mc = json::parse(testsupport::slurp(tmp / "c" / "corpus.jsonl.manifest.json"));
  EXPECT_EQ(mc["outputs"], m["outputs"]);
}

TEST(Cli, WorkerPrecedence) {
  TempDir tmp;
  testsupport::spit(tmp / "w.conf", "workers = 3\n");
  const std::string root = s(testsupport::fixture("corpus"));
  auto hash_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"ingest", "--root", root, "--out", s(tmp / "c.jsonl"), "--skip-log",
                                     s(tmp / "s.jsonl")};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(testsupport::slurp(tmp / "c.jsonl.manifest.json"))["config_hash"].get<std::string>();
  };
  unsetenv("FIGURELINK_WORKERS");
  EXPECT_EQ(hash_of({}), config_hash(1));
  EXPECT_EQ(hash_of({"--config", s(tmp / "w.conf")}), config_hash(3));
  setenv("FIGURELINK_WORKERS", "5", 1);
  EXPECT_EQ(hash_of({"--config", s(tmp / "w.conf")}), config_hash(5));
  EXPECT_EQ(hash_of({"--config", s(tmp / "w.conf"), "--workers", "7"}), config_hash(7));
  setenv("FIGURELINK_WORKERS", "zero", 1);
  const auto r = run_cli({"ingest", "--root", root, "--out", s(tmp / "c.jsonl"), "--skip-log", s(tmp / "s.jsonl")});
  EXPECT_EQ(r.code, 2);
  unsetenv("FIGURELINK_WORKERS");
  const auto zero =
      run_cli({"ingest", "--root", root, "--out", s(tmp / "c.jsonl"), "--skip-log", s(tmp / "s.jsonl"), "--workers", "0"});
  EXPECT_EQ(zero.code, 2);
}

TEST(Cli, IngestMissingRoot) {
  TempDir tmp;
  const auto r = run_cli({"ingest", "--root", s(tmp / "absent"), "--out", s(tmp / "c.jsonl"), "--skip-log",
                          s(tmp / "s.jsonl")});
  EXPECT_NE(r.code, 0);
}

TEST(Cli, FinegrainEndToEnd) {
  TempDir tmp;
  const auto r = run_cli({"finegrain", "--root", s(testsupport::fixture("corpus")), "--out", s(tmp / "fine.jsonl"),
                          "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(r.out);
  EXPECT_EQ(report["fine_pairs"], 15);
  EXPECT_EQ(report["whole_figure_pairs"], 18);
  EXPECT_TRUE(fs::exists(tmp / "fine.jsonl.subcaptions.jsonl"));
  EXPECT_TRUE(fs::exists(tmp / "fine.jsonl.audit.jsonl"));
  EXPECT_TRUE(fs::exists(tmp / "fine.jsonl.manifest.json"));
  EXPECT_TRUE(fs::is_directory(tmp / "crops"));
}

TEST(Cli, RetrievalEndToEnd) {
  TempDir tmp;
  std::mt19937_64 rng(11);
  const auto images = testsupport::random_store(rng, 60, 12, evaluate::Modality::Image);
  const auto texts = testsupport::noisy_copy(rng, images, 0.6, evaluate::Modality::Text);
  evaluate::write_emb(images, tmp / "img.emb");
  evaluate::write_emb(texts, tmp / "txt.emb");
  const auto expected = evaluate::recall_at_k(images, texts, evaluate::identity_pairing(images), {1, 5, 10});

  const auto r = run_cli({"retrieval", "--queries", s(tmp / "img.emb"), "--targets", s(tmp / "txt.emb"), "--out",
                          s(tmp / "r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(testsupport::slurp(tmp / "r.json"));
  EXPECT_EQ(j["queries"], 60);
  EXPECT_EQ(j["dim"], 12);
  EXPECT_EQ(j["search"], "exact");
  EXPECT_EQ(j["runs"][0], evaluate::to_json(expected.forward));
  EXPECT_EQ(j["runs"][1], evaluate::to_json(expected.backward));

  testsupport::spit(tmp / "ex.conf", "ann.exhaustive = true\n");
  const auto ann = run_cli({"retrieval", "--queries", s(tmp / "img.emb"), "--targets", s(tmp / "txt.emb"), "--ann",
                            "--config", s(tmp / "ex.conf"), "--k", "1,5", "--out", s(tmp / "a.json")});
  ASSERT_EQ(ann.code, 0) << ann.err;
  const auto ja = json::parse(testsupport::slurp(tmp / "a.json"));
  EXPECT_EQ(ja["search"], "ann");
  EXPECT_EQ(ja["runs"][0]["recall"]["R@1"], j["runs"][0]["recall"]["R@1"]);
  EXPECT_EQ(ja["runs"][0]["recall"]["R@5"], j["runs"][0]["recall"]["R@5"]);
  EXPECT_EQ(ja["ann"]["candidate_recall_forward"], 1.0);

  // explicit pairing, one query paired with the wrong target
  std::string pairing;
  for (std::size_t i = 0; i < images.size(); ++i)
    pairing += images.id(i) + "\t" + texts.id(i == 0 ? 1 : i == 1 ? 0 : i) + "\n";
  testsupport::spit(tmp / "pairing.tsv", pairing);
  const auto p = run_cli({"retrieval", "--queries", s(tmp / "img.emb"), "--targets", s(tmp / "txt.emb"), "--pairing",
                          s(tmp / "pairing.tsv"), "--out", s(tmp / "p.json")});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto jp = json::parse(testsupport::slurp(tmp / "p.json"));
  EXPECT_LT(jp["runs"][0]["recall"]["R@1"].get<double>(), j["runs"][0]["recall"]["R@1"].get<double>());
}

TEST(Cli, RetrievalDimensionMismatchIsExit1) {
  TempDir tmp;
  std::mt19937_64 rng(12);
  evaluate::write_emb(testsupport::random_store(rng, 5, 8, evaluate::Modality::Image), tmp / "a.emb");
  evaluate::write_emb(testsupport::random_store(rng, 5, 6, evaluate::Modality::Text), tmp / "b.emb");
  const auto r = run_cli({"retrieval", "--queries", s(tmp / "a.emb"), "--targets", s(tmp / "b.emb"), "--manifest",
                          s(tmp / "m.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DimensionMismatch"), std::string::npos) << r.err;
  testsupport::spit(tmp / "junk.emb", "not an embedding file");
  EXPECT_EQ(run_cli({"retrieval", "--queries", s(tmp / "junk.emb"), "--targets", s(tmp / "b.emb"), "--manifest",
                     s(tmp / "m.json")})
                .code,
            1);
}

TEST(Cli, ZeroShotEndToEnd) {
  TempDir tmp;
  std::mt19937_64 rng(13);
  const auto task = testsupport::make_planted_zero_shot(rng, 40, 6);
  evaluate::write_emb(task.images, tmp / "img.emb");
  evaluate::write_emb(task.prompts, tmp / "prompts.emb");
  json classes = json::array();
  for (const auto& c : task.classes) classes.push_back({{"class_name", c.class_name}, {"prompt_templates", c.prompt_templates}});
  testsupport::spit(tmp / "classes.json", classes.dump());
  std::string labels;
  for (std::size_t i = 0; i < task.images.size(); ++i) labels += task.images.id(i) + "\t" + std::to_string(task.labels[i]) + "\n";
  testsupport::spit(tmp / "labels.tsv", labels);

  const auto r = run_cli({"zeroshot", "--images", s(tmp / "img.emb"), "--prompts", s(tmp / "prompts.emb"),
                          "--classes", s(tmp / "classes.json"), "--labels", s(tmp / "labels.tsv"), "--out",
                          s(tmp / "z.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(testsupport::slurp(tmp / "z.json"));
  const auto oracle = testsupport::oracle_zero_shot(task);
  EXPECT_NEAR(j["accuracy"].get<double>(), oracle.accuracy, 1e-12);
  EXPECT_NEAR(j["auroc"].get<double>(), oracle.auroc, 1e-12);
  ASSERT_EQ(j["predictions"].size(), task.images.size());
  for (std::size_t i = 0; i < task.images.size(); ++i) EXPECT_EQ(j["predictions"][i]["predicted"], oracle.predicted[i]);

  // benchmark prompts are absent from the prompt store
  const auto missing = run_cli({"zeroshot", "--images", s(tmp / "img.emb"), "--prompts", s(tmp / "prompts.emb"),
                                "--dataset", "pcam", "--manifest", s(tmp / "m.json")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(run_cli({"zeroshot", "--images", s(tmp / "img.emb"), "--prompts", s(tmp / "prompts.emb"), "--dataset",
                     "pcam", "--classes", s(tmp / "classes.json"), "--manifest", s(tmp / "m.json")})
                .code,
            2);
  EXPECT_EQ(run_cli({"zeroshot", "--images", s(tmp / "img.emb"), "--prompts", s(tmp / "prompts.emb"), "--dataset",
                     "imagenet", "--manifest", s(tmp / "m.json")})
                .code,
            2);
}

TEST(Cli, CensusEndToEnd) {
  TempDir tmp;
  // images sit on axis 0 (x3), axis 1 (x2) or axis 2 (x1)
  std::vector<std::string> ids;
  std::vector<double> values;
  const int axis_of[] = {0, 1, 0, 2, 1, 0};
  for (int i = 0; i < 6; ++i) {
    ids.push_back("img" + std::to_string(i));
    for (int k = 0; k < 3; ++k) values.push_back(k == axis_of[i] ? 1.0 : 0.1);
  }
  evaluate::write_emb(evaluate::EmbeddingStore(ids, 3, values, evaluate::Modality::Image), tmp / "img.emb");
  evaluate::write_emb(evaluate::EmbeddingStore({"histology", "x-ray", "bar chart"}, 3,
                                                {1, 0, 0, 0, 1, 0, 0, 0, 1}, evaluate::Modality::Text),
                      tmp / "kw.emb");
  testsupport::spit(tmp / "tax.json", R"([{"type_name": "microscopy", "keywords": ["histology"]},
    {"type_name": "radiology", "keywords": ["x-ray"]}, {"type_name": "chart", "keywords": ["bar chart"]}])");
  const auto r = run_cli({"census", "--images", s(tmp / "img.emb"), "--taxonomy", s(tmp / "tax.json"), "--keywords",
                          s(tmp / "kw.emb"), "--out", s(tmp / "c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(testsupport::slurp(tmp / "c.json"));
  EXPECT_EQ(j["images"], 6);
  ASSERT_EQ(j["top"].size(), 3u);
  EXPECT_EQ(j["top"][0]["type_name"], "microscopy");
  EXPECT_EQ(j["top"][0]["count"], 3);
  EXPECT_DOUBLE_EQ(j["top"][0]["fraction"].get<double>(), 0.5);
  EXPECT_EQ(j["top"][1]["type_name"], "radiology");
  EXPECT_EQ(j["top"][2]["count"], 1);

  const auto top1 = run_cli({"census", "--images", s(tmp / "img.emb"), "--taxonomy", s(tmp / "tax.json"),
                             "--keywords", s(tmp / "kw.emb"), "--top", "1", "--out", s(tmp / "c1.json")});
  ASSERT_EQ(top1.code, 0) << top1.err;
  EXPECT_EQ(json::parse(testsupport::slurp(tmp / "c1.json"))["top"].size(), 1u);

  testsupport::spit(tmp / "bad.json", R"({"type_name": 3})");
  EXPECT_EQ(run_cli({"census", "--images", s(tmp / "img.emb"), "--taxonomy", s(tmp / "bad.json"), "--keywords",
                     s(tmp / "kw.emb"), "--manifest", s(tmp / "m.json")})
                .code,
            1);
}
