#include "figurelink/cli.hpp"

#include "figurelink/captioner.hpp"
#include "figurelink/error.hpp"
#include "figurelink/evaluate.hpp"
#include "figurelink/finegrain.hpp"
#include "figurelink/ingest.hpp"
#include "figurelink/io.hpp"
#include "figurelink/stats.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace figurelink::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::string manifest_path;
  std::string out_path;
  bool pretty = false;
  std::optional<std::size_t> workers;
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

config::PipelineConfig effective_config(const Common& c) {
  config::PipelineConfig cfg;
  if (!c.config_path.empty()) cfg = config::load_config(c.config_path);
  if (const auto w = config::env_workers()) cfg.workers = *w;
  if (c.workers) {
    if (*c.workers < 1) config_error("--workers must be >= 1");
    cfg.workers = *c.workers;
  }
  cfg.validate();
  return cfg;
}

// Refuses to write over an input.
void check_outputs(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  for (const auto& o : outputs) {
    if (o.empty()) continue;
    std::error_code ec;
    if (!fs::exists(o, ec)) continue;
    for (const auto& i : inputs) {
      if (!i.empty() && fs::exists(i, ec) && fs::equivalent(i, o, ec)) {
        config_error("output " + o + " would overwrite input " + i);
      }
    }
  }
}

fs::path manifest_target(const Common& c, const std::string& command, const std::string& primary_out) {
  if (!c.manifest_path.empty()) return c.manifest_path;
  if (!primary_out.empty()) return primary_out + ".manifest.json";
  return "figurelink-" + command + ".manifest.json";
}

void write_manifest(const Common& c, const Manifest& m, const std::string& primary_out) {
  io::write_atomic(manifest_target(c, m.command, primary_out), manifest_json(m).dump(2) + "\n");
}

// JSON report to --out (atomically) or stdout; --pretty prints the table to stdout.
void emit_report(const Common& c, const nlohmann::ordered_json& report, const std::string& table, std::ostream& out) {
  if (!c.out_path.empty()) io::write_atomic(c.out_path, report.dump(2) + "\n");
  if (c.pretty) {
    out << table;
  } else if (c.out_path.empty()) {
    out << report.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string root, skip_log, pairs;
};

int cmd_ingest(const Common& c, const IngestArgs& a, std::ostream& out) {
  const auto cfg = effective_config(c);
  check_outputs({a.root}, {c.out_path, a.skip_log, a.pairs});
  ingest::IngestOptions opt;
  opt.out = c.out_path;
  opt.skip_log = a.skip_log;
  if (!a.pairs.empty()) opt.pairs_out = fs::path(a.pairs);
  opt.workers = cfg.workers;
  const auto report = ingest::run_pipeline(a.root, opt);

  Manifest m;
  m.command = "ingest";
  m.config = &cfg;
  m.inputs["root"] = input_digest(a.root);
  m.outputs["corpus"] = io::sha256_file(c.out_path);
  m.outputs["skip_log"] = io::sha256_file(a.skip_log);
  if (!a.pairs.empty()) m.outputs["pairs"] = io::sha256_file(a.pairs);
  m.counters = ingest::to_json(report, false);
  write_manifest(c, m, c.out_path);

  auto j = ingest::to_json(report, true);
  if (c.pretty) {
    out << "articles seen " << report.articles_seen << ", emitted " << report.articles_emitted << ", no figures "
        << report.skipped_no_figures << ", malformed " << report.skipped_malformed << ", pairs "
        << report.pairs_emitted << " (" << fixed(report.wall_time, 2) << " s)\n";
  } else {
    out << j.dump() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FinegrainArgs {
  std::string root, subcaptions, audit, crops, label_patterns;
};

int cmd_finegrain(const Common& c, const FinegrainArgs& a, std::ostream& out) {
  auto cfg = effective_config(c);
  if (!a.label_patterns.empty()) cfg.label_patterns = fs::path(a.label_patterns);
  std::optional<captioner::LabelGrammar> grammar;
  if (cfg.label_patterns) {
    try {
      grammar = captioner::LabelGrammar::load(*cfg.label_patterns);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  const int version = grammar ? grammar->version() : captioner::LabelGrammar::builtin().version();
  if (version != cfg.label_patterns_version) {
    config_error("label pattern file has version " + std::to_string(version) + ", config expects " +
                 std::to_string(cfg.label_patterns_version));
  }
  const std::string subcaptions = a.subcaptions.empty() ? c.out_path + ".subcaptions.jsonl" : a.subcaptions;
  const std::string audit = a.audit.empty() ? c.out_path + ".audit.jsonl" : a.audit;
  const std::string crops = a.crops.empty() ? (fs::path(c.out_path).parent_path() / "crops").string() : a.crops;
  check_outputs({a.root}, {c.out_path, subcaptions, audit});

  finegrain::FinegrainOptions opt;
  opt.pairs_out = c.out_path;
  opt.subcaptions_out = subcaptions;
  opt.audit_out = audit;
  opt.crops_dir = crops;
  opt.workers = cfg.workers;
  opt.split = cfg.split;
  opt.grammar = grammar ? &*grammar : nullptr;
  const auto report = finegrain::run_finegrain(a.root, opt);

  Manifest m;
  m.command = "finegrain";
  m.config = &cfg;
  m.inputs["root"] = input_digest(a.root);
  if (cfg.label_patterns) m.inputs["label_patterns"] = io::sha256_file(*cfg.label_patterns);
  m.outputs["pairs"] = io::sha256_file(c.out_path);
  m.outputs["subcaptions"] = io::sha256_file(subcaptions);
  m.outputs["audit"] = io::sha256_file(audit);
  m.outputs["crops"] = tree_digest(crops);
  m.counters = finegrain::to_json(report);
  write_manifest(c, m, c.out_path);

  if (c.pretty) {
    out << "figures " << report.figures << " (" << report.labeled_figures << " labeled), panel pairs "
        << report.fine_pairs << ", whole-figure pairs " << report.whole_figure_pairs << ", unresolved labels "
        << report.unresolved_labels << ", orphan panels " << report.orphan_panels << "\n";
  } else {
    out << m.counters.dump() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string pairs, images_root;
};

int cmd_stats(const Common& c, const StatsArgs& a, std::ostream& out) {
  const auto cfg = effective_config(c);
  check_outputs({a.pairs}, {c.out_path});
  const std::string images_root =
      a.images_root.empty() ? fs::path(a.pairs).parent_path().string() : a.images_root;
  const auto rows = stats::read_pairs_jsonl(a.pairs);
  const auto report = stats::corpus_stats(rows, images_root);
  const auto j = stats::to_json(report);
  emit_report(c, j, stats::to_table(report), out);

  Manifest m;
  m.command = "stats";
  m.config = &cfg;
  m.inputs["pairs"] = io::sha256_file(a.pairs);
  if (!c.out_path.empty()) m.outputs["report"] = io::sha256_file(c.out_path);
  m.counters["pairs"] = report.pairs;
  m.counters["images_measured"] = report.images_measured;
  m.counters["unreadable_images"] = report.unreadable_images;
  write_manifest(c, m, c.out_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RetrievalArgs {
  std::string queries, targets, pairing, k_values;
  bool ann = false;
};

evaluate::Pairing read_pairing(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  evaluate::Pairing p;
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty() || row[0] == '#') continue;
    const auto tab = row.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(lineno) + ": expected query<TAB>target");
    }
    if (!p.emplace(row.substr(0, tab), row.substr(tab + 1)).second) {
      throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(lineno) + ": repeated query id");
    }
  }
  return p;
}

int cmd_retrieval(const Common& c, const RetrievalArgs& a, std::ostream& out) {
  auto cfg = effective_config(c);
  if (!a.k_values.empty()) cfg.k_values = config::parse_k_values(a.k_values);
  check_outputs({a.queries, a.targets, a.pairing}, {c.out_path});
  const auto queries = evaluate::read_emb(a.queries);
  const auto targets = evaluate::read_emb(a.targets);
  if (queries.dim() != targets.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "queries have dimension " + std::to_string(queries.dim()) +
                                                  ", targets have " + std::to_string(targets.dim()));
  }
  const auto pairing = a.pairing.empty() ? evaluate::identity_pairing(queries) : read_pairing(a.pairing);
  std::vector<std::size_t> ks;
  for (const auto k : cfg.k_values) {
    if (k <= std::min(queries.size(), targets.size())) ks.push_back(k);
  }

  std::optional<evaluate::GraphIndex> fwd, bwd;
  if (a.ann) {
    fwd.emplace(targets, cfg.ann);
    bwd.emplace(queries, cfg.ann);
  }
  const auto report =
      evaluate::recall_at_k(queries, targets, pairing, ks, fwd ? &*fwd : nullptr, bwd ? &*bwd : nullptr);

  nlohmann::ordered_json j;
  j["queries"] = queries.size();
  j["targets"] = targets.size();
  j["dim"] = queries.dim();
  j["k_values"] = ks;
  j["search"] = a.ann ? "ann" : "exact";
  j["tie_rule"] = "ascending id";
  j["runs"] = {evaluate::to_json(report.forward), evaluate::to_json(report.backward)};
  if (a.ann && !ks.empty()) {
    const std::size_t k = ks.back();
    nlohmann::ordered_json ann;
    ann["max_degree"] = cfg.ann.max_degree;
    ann["ef_construction"] = cfg.ann.ef_construction;
    ann["ef_search"] = cfg.ann.ef_search;
    ann["exhaustive"] = cfg.ann.exhaustive;
    ann["k"] = k;
    ann["candidate_recall_forward"] = evaluate::candidate_recall(queries, targets, *fwd, k);
    ann["candidate_recall_backward"] = evaluate::candidate_recall(targets, queries, *bwd, k);
    j["ann"] = ann;
  }

  std::ostringstream table;
  table << "direction        ";
  for (const auto k : ks) table << "  R@" << k << "   ";
  table << "\n";
  for (const auto* run : {&report.forward, &report.backward}) {
    char name[32];
    std::snprintf(name, sizeof name, "%-16s", run->direction.c_str());
    table << name;
    for (const auto k : ks) table << "  " << fixed(run->recall_at.at(k));
    table << "\n";
  }
  emit_report(c, j, table.str(), out);

  Manifest m;
  m.command = "retrieval";
  m.config = &cfg;
  m.inputs["queries"] = io::sha256_file(a.queries);
  m.inputs["targets"] = io::sha256_file(a.targets);
  if (!a.pairing.empty()) m.inputs["pairing"] = io::sha256_file(a.pairing);
  if (!c.out_path.empty()) m.outputs["report"] = io::sha256_file(c.out_path);
  m.counters["queries"] = queries.size();
  m.counters["targets"] = targets.size();
  write_manifest(c, m, c.out_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ZeroShotArgs {
  std::string images, prompts, dataset, classes, labels;
};

std::vector<evaluate::ClassSpec> read_classes(const fs::path& path) {
  std::vector<evaluate::ClassSpec> out;
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    for (const auto& c : j) {
      out.push_back({c.at("class_name").get<std::string>(), c.at("prompt_templates").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::size_t> read_labels(const fs::path& path, const evaluate::EmbeddingStore& images,
                                     std::size_t classes) {
  std::istringstream in(io::read_file(path));
  std::vector<std::optional<std::size_t>> labels(images.size());
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty() || row[0] == '#') continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto tab = row.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::MalformedFile, where + ": expected id<TAB>class_index");
    const auto idx = images.find(row.substr(0, tab));
    if (!idx) throw Error(ErrorCode::MalformedFile, where + ": unknown image id");
    std::size_t label = 0;
    try {
      label = std::stoul(row.substr(tab + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedFile, where + ": bad class index");
    }
    if (label >= classes) throw Error(ErrorCode::MalformedFile, where + ": class index out of range");
    labels[*idx] = label;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) throw Error(ErrorCode::MalformedFile, "no label for image " + images.id(i));
    out.push_back(*labels[i]);
  }
  return out;
}

int cmd_zeroshot(const Common& c, const ZeroShotArgs& a, std::ostream& out) {
  const auto cfg = effective_config(c);
  if (a.dataset.empty() == a.classes.empty()) config_error("exactly one of --dataset and --classes is required");
  check_outputs({a.images, a.prompts, a.classes, a.labels}, {c.out_path});
  std::vector<evaluate::ClassSpec> classes;
  if (!a.dataset.empty()) {
    try {
      classes = evaluate::benchmark_classes(a.dataset);
    } catch (const Error& e) {
      config_error(e.what());
    }
  } else {
    classes = read_classes(a.classes);
  }
  const auto images = evaluate::read_emb(a.images);
  const auto prompts = evaluate::read_emb(a.prompts);
  std::optional<std::vector<std::size_t>> labels;
  if (!a.labels.empty()) labels = read_labels(a.labels, images, classes.size());
  const auto result = evaluate::zero_shot_classify(images, classes, evaluate::lookup_embedder(prompts), labels);

  nlohmann::ordered_json j;
  if (!a.dataset.empty()) j["dataset"] = a.dataset;
  auto names = nlohmann::ordered_json::array();
  for (const auto& cl : classes) names.push_back(cl.class_name);
  j["classes"] = names;
  j["images"] = images.size();
  j["accuracy"] = result.accuracy ? nlohmann::ordered_json(*result.accuracy) : nlohmann::ordered_json(nullptr);
  j["auroc"] = result.auroc ? nlohmann::ordered_json(*result.auroc) : nlohmann::ordered_json(nullptr);
  auto preds = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    nlohmann::ordered_json p;
    p["id"] = images.id(i);
    p["predicted"] = result.predicted[i];
    p["scores"] = result.scores[i];
    preds.push_back(std::move(p));
  }
  j["predictions"] = std::move(preds);

  std::ostringstream table;
  table << "images " << images.size() << ", classes " << classes.size() << "\n";
  table << "accuracy " << (result.accuracy ? fixed(*result.accuracy) : "-") << ", AUROC "
        << (result.auroc ? fixed(*result.auroc) : "-") << "\n";
  emit_report(c, j, table.str(), out);

  Manifest m;
  m.command = "zeroshot";
  m.config = &cfg;
  m.inputs["images"] = io::sha256_file(a.images);
  m.inputs["prompts"] = io::sha256_file(a.prompts);
  if (!a.classes.empty()) m.inputs["classes"] = io::sha256_file(a.classes);
  if (!a.labels.empty()) m.inputs["labels"] = io::sha256_file(a.labels);
  if (!c.out_path.empty()) m.outputs["report"] = io::sha256_file(c.out_path);
  m.counters["images"] = images.size();
  m.counters["classes"] = classes.size();
  write_manifest(c, m, c.out_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CensusArgs {
  std::string images, taxonomy, keywords;
  std::size_t top = 30;
};

int cmd_census(const Common& c, const CensusArgs& a, std::ostream& out) {
  const auto cfg = effective_config(c);
  check_outputs({a.images, a.taxonomy, a.keywords}, {c.out_path});
  nlohmann::json tax;
  try {
    tax = nlohmann::json::parse(io::read_file(a.taxonomy));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, a.taxonomy + ": " + e.what());
  }
  const auto types = evaluate::parse_taxonomy(tax);
  const auto images = evaluate::read_emb(a.images);
  const auto keyword_store = evaluate::read_emb(a.keywords);
  const auto keywords = evaluate::embed_taxonomy(types, evaluate::lookup_embedder(keyword_store), images.dim());
  const auto hist = evaluate::taxonomy_census(images, keywords);

  nlohmann::ordered_json j;
  j["images"] = images.size();
  j["types"] = hist.size();
  auto rows = nlohmann::ordered_json::array();
  std::ostringstream table;
  for (std::size_t i = 0; i < hist.size() && i < a.top; ++i) {
    nlohmann::ordered_json r;
    r["type_name"] = hist[i].first;
    r["count"] = hist[i].second;
    const double frac = images.size() == 0 ? 0.0 : static_cast<double>(hist[i].second) / images.size();
    r["fraction"] = frac;
    rows.push_back(std::move(r));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%3zu  %-32s %8zu  %6.2f%%\n", i + 1, hist[i].first.c_str(), hist[i].second,
                  100.0 * frac);
    table << buf;
  }
  j["top"] = std::move(rows);
  emit_report(c, j, table.str(), out);

  Manifest m;
  m.command = "census";
  m.config = &cfg;
  m.inputs["images"] = io::sha256_file(a.images);
  m.inputs["taxonomy"] = io::sha256_file(a.taxonomy);
  m.inputs["keywords"] = io::sha256_file(a.keywords);
  if (!c.out_path.empty()) m.outputs["report"] = io::sha256_file(c.out_path);
  m.counters["images"] = images.size();
  m.counters["types"] = hist.size();
  write_manifest(c, m, c.out_path);
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c, bool needs_out) {
  sub->add_option("--config", c.config_path, "Configuration file (key = value)")->check(CLI::ExistingFile);
  sub->add_option("--manifest", c.manifest_path, "Manifest path (default: <out>.manifest.json)");
  auto* o = sub->add_option("--out", c.out_path, needs_out ? "Output JSONL" : "Write the JSON report here");
  if (needs_out) o->required();
  sub->add_flag("--pretty", c.pretty, "Human-readable table on stdout");
}

}  // namespace

std::string tree_digest(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    files.emplace_back(it->path().lexically_relative(root).generic_string(), io::sha256_file(it->path()));
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& [p, h] : files) listing += p + "\t" + h + "\n";
  return io::sha256_hex(listing);
}

std::string input_digest(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) return tree_digest(path);
  return io::sha256_file(path);
}

nlohmann::ordered_json manifest_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "figurelink";
  j["tool_version"] = kToolVersion;
  j["command"] = m.command;
  const config::PipelineConfig defaults;
  const std::string canonical = (m.config != nullptr ? *m.config : defaults).canonical();
  j["config_hash"] = io::sha256_hex(canonical);
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["counters"] = m.counters;
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"figurelink: figure-caption corpus curation and embedding evaluation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common common;
  std::size_t workers = 0;
  auto add_workers = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Worker threads (default: FIGURELINK_WORKERS, config, 1)");
  };

  IngestArgs ia;
  auto* ingest_cmd = app.add_subcommand("ingest", "Article packages to a JSONL corpus");
  ingest_cmd->add_option("--root", ia.root, "Directory of unpacked PMC<id> packages")->required()->check(
      CLI::ExistingDirectory);
  ingest_cmd->add_option("--skip-log", ia.skip_log, "Skip log JSONL")->required();
  ingest_cmd->add_option("--pairs", ia.pairs, "Also write one (image, caption) pair per line");
  add_workers(ingest_cmd);
  add_common(ingest_cmd, common, true);

  FinegrainArgs fa;
  auto* fine_cmd = app.add_subcommand("finegrain", "Panel-level pairs from article packages");
  fine_cmd->add_option("--root", fa.root, "Directory of unpacked PMC<id> packages")->required()->check(
      CLI::ExistingDirectory);
  fine_cmd->add_option("--subcaptions", fa.subcaptions, "Sub-caption JSONL (default: <out>.subcaptions.jsonl)");
  fine_cmd->add_option("--audit", fa.audit, "Unresolved label JSONL (default: <out>.audit.jsonl)");
  fine_cmd->add_option("--crops", fa.crops, "Panel crop directory (default: crops/ next to --out)");
  fine_cmd->add_option("--label-patterns", fa.label_patterns, "Label pattern file")->check(CLI::ExistingFile);
  add_workers(fine_cmd);
  add_common(fine_cmd, common, true);

  StatsArgs sa;
  auto* stats_cmd = app.add_subcommand("stats", "Caption length and image size statistics");
  stats_cmd->add_option("--pairs", sa.pairs, "Pairs JSONL")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--images-root", sa.images_root, "Base of relative image paths (default: pairs dir)");
  add_common(stats_cmd, common, false);

  RetrievalArgs ra;
  auto* ret_cmd = app.add_subcommand("retrieval", "Cross-modal Recall@k over EMB1 files");
  ret_cmd->add_option("--queries", ra.queries, "Query embeddings")->required();
  ret_cmd->add_option("--targets", ra.targets, "Target embeddings")->required();
  ret_cmd->add_option("--pairing", ra.pairing, "query<TAB>target lines (default: equal ids)");
  ret_cmd->add_option("--k", ra.k_values, "Cutoffs, e.g. 1,5,10");
  ret_cmd->add_flag("--ann", ra.ann, "Use the graph index instead of the exact scan");
  add_common(ret_cmd, common, false);

  ZeroShotArgs za;
  auto* zs_cmd = app.add_subcommand("zeroshot", "Prompt-based zero-shot classification");
  zs_cmd->add_option("--images", za.images, "Image embeddings")->required();
  zs_cmd->add_option("--prompts", za.prompts, "Text embeddings keyed by the rendered prompt")->required();
  zs_cmd->add_option("--dataset", za.dataset, "pcam, lc25000_lung, lc25000_colon, tcga_til or rsna");
  zs_cmd->add_option("--classes", za.classes, "JSON [{class_name, prompt_templates}]");
  zs_cmd->add_option("--labels", za.labels, "id<TAB>class_index lines");
  add_common(zs_cmd, common, false);

  CensusArgs ca;
  auto* census_cmd = app.add_subcommand("census", "Nearest-keyword image-type histogram");
  census_cmd->add_option("--images", ca.images, "Image embeddings")->required();
  census_cmd->add_option("--taxonomy", ca.taxonomy, "JSON [{type_name, keywords}]")->required();
  census_cmd->add_option("--keywords", ca.keywords, "Text embeddings keyed by keyword")->required();
  census_cmd->add_option("--top", ca.top, "Rows to report")->check(CLI::PositiveNumber);
  add_common(census_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (auto* sub : {ingest_cmd, fine_cmd}) {
    if (sub->parsed() && sub->count("--workers") > 0) common.workers = workers;
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(common, ia, out);
    if (fine_cmd->parsed()) return cmd_finegrain(common, fa, out);
    if (stats_cmd->parsed()) return cmd_stats(common, sa, out);
    if (ret_cmd->parsed()) return cmd_retrieval(common, ra, out);
    if (zs_cmd->parsed()) return cmd_zeroshot(common, za, out);
    if (census_cmd->parsed()) return cmd_census(common, ca, out);
  } catch (const Error& e) {
    err << "figurelink: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "figurelink: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace figurelink::cli
