#include "figurelink/ingest.hpp"

#include "figurelink/error.hpp"
#include "figurelink/io.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace figurelink::ingest {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 9> kImagePriority = {".ppm", ".pgm", ".pnm", ".png", ".jpg",
                                                            ".jpeg", ".tif", ".tiff", ".gif"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  return s;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::size_t priority(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  const auto it = std::find(kImagePriority.begin(), kImagePriority.end(), ext);
  return static_cast<std::size_t>(it - kImagePriority.begin());
}

[[noreturn]] void rethrow_fs(const fs::filesystem_error& e, const fs::path& where) {
  if (e.code() == std::errc::permission_denied) throw Error(ErrorCode::PermissionDenied, where.string());
  throw Error(ErrorCode::RootNotFound, where.string() + ": " + e.code().message());
}

ArticlePackage scan_package(const fs::path& dir) {
  ArticlePackage pkg;
  pkg.package_path = dir;
  pkg.pmcid = dir.filename().string();
  std::vector<fs::path> nxml, xml;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const fs::path rel = it->path().lexically_relative(dir);
    const auto name = lower(it->path().filename().string());
    if (ends_with(name, ".nxml")) {
      nxml.push_back(rel);
    } else if (ends_with(name, ".xml")) {
      xml.push_back(rel);
    } else if (!ends_with(name, kOcrSuffix)) {
      pkg.media_files.push_back(rel);
    }
  }
  std::sort(nxml.begin(), nxml.end());
  std::sort(xml.begin(), xml.end());
  std::sort(pkg.media_files.begin(), pkg.media_files.end());
  if (!nxml.empty()) {
    pkg.xml_path = dir / nxml.front();
  } else if (!xml.empty()) {
    pkg.xml_path = dir / xml.front();
  }
  pkg.has_xml = !pkg.xml_path.empty();
  return pkg;
}

SkipEntry figure_skip(const std::string& pmcid, const jats::FigureSkip& s) {
  const std::string detail(jats::to_string(s.reason));
  std::optional<std::string> fig_id;
  if (!s.fig_id.empty()) fig_id = s.fig_id;
  switch (s.reason) {
    case jats::FigureSkipReason::NoGraphic: return {pmcid, SkipReason::MissingMedia, fig_id, detail};
    case jats::FigureSkipReason::EmptyCaption: return {pmcid, SkipReason::EmptyCaption, fig_id, std::nullopt};
    case jats::FigureSkipReason::MissingId:
    case jats::FigureSkipReason::DuplicateId: break;
  }
  return {pmcid, SkipReason::MalformedXml, fig_id, detail};
}

std::string line(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) + "\n";
}

}  // namespace

bool is_package_name(const std::string& name) {
  if (name.size() < 4 || name.compare(0, 3, "PMC") != 0) return false;
  return std::all_of(name.begin() + 3, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<ArticlePackage> enumerate_packages(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::RootNotFound, root.string());
  std::vector<ArticlePackage> out;
  try {
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_directory()) continue;
      const auto name = it->path().filename().string();
      if (!is_package_name(name)) continue;
      it.disable_recursion_pending();
      out.push_back(scan_package(it->path()));
    }
  } catch (const fs::filesystem_error& e) {
    rethrow_fs(e, e.path1().empty() ? root : e.path1());
  }
  std::sort(out.begin(), out.end(), [](const ArticlePackage& a, const ArticlePackage& b) {
    return a.pmcid != b.pmcid ? a.pmcid < b.pmcid : a.package_path < b.package_path;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].pmcid == out[i - 1].pmcid) {
      throw Error(ErrorCode::DuplicatePmcid, out[i].pmcid + " at " + out[i - 1].package_path.string() + " and " +
                                                 out[i].package_path.string());
    }
  }
  return out;
}

jats::MediaIndex media_index(const ArticlePackage& package) {
  jats::MediaIndex index;
  std::map<std::string, std::size_t> best;
  for (const auto& rel : package.media_files) {
    const std::string stem = jats::graphic_stem(rel.generic_string());
    const std::size_t p = priority(rel);
    const auto it = best.find(stem);
    if (it != best.end() && it->second <= p) continue;  // files are sorted, so ties keep the first
    best[stem] = p;
    index[stem] = package.package_path / rel;
  }
  return index;
}

std::string_view to_string(SkipReason reason) noexcept {
  switch (reason) {
    case SkipReason::MalformedXml: return "malformed_xml";
    case SkipReason::NoFigures: return "no_figures";
    case SkipReason::MissingMedia: return "missing_media";
    case SkipReason::EmptyCaption: return "empty_caption";
  }
  return "unknown";
}

ArticleResult process_package(const ArticlePackage& package) {
  ArticleResult r;
  r.pmcid = package.pmcid;
  auto malformed = [&](const std::string& detail) {
    r.status = ArticleStatus::Malformed;
    r.pairs.clear();
    r.skips.push_back({package.pmcid, SkipReason::MalformedXml, std::nullopt, detail});
    return r;
  };
  if (!package.has_xml) return malformed("no XML file in package");
  try {
    r.record = jats::read_article(io::read_file(package.xml_path));
    for (const auto& s : r.record.skipped_figures) r.skips.push_back(figure_skip(package.pmcid, s));
    const bool any_figure = !r.record.figures.empty();
    auto extraction = jats::extract_pairs(r.record, media_index(package));
    const std::set<std::string> unresolved(extraction.unresolved.begin(), extraction.unresolved.end());
    for (const auto& f : r.record.figures) {
      if (unresolved.count(f.fig_id) != 0) {
        r.skips.push_back({package.pmcid, SkipReason::MissingMedia, f.fig_id, "no media file for " + f.graphic_ref});
      }
    }
    std::erase_if(r.record.figures, [&](const jats::FigureEntry& f) { return unresolved.count(f.fig_id) != 0; });
    r.pairs = std::move(extraction.pairs);
    if (r.pairs.empty()) {
      r.status = ArticleStatus::NoFigures;
      r.skips.push_back({package.pmcid, any_figure ? SkipReason::MissingMedia : SkipReason::NoFigures, std::nullopt,
                         any_figure ? std::optional<std::string>("no figure has its image") : std::nullopt});
    } else {
      r.status = ArticleStatus::Emitted;
    }
  } catch (const std::exception& e) {
    r.skips.clear();
    return malformed(e.what());
  }
  return r;
}

void ordered_parallel(std::size_t n, std::size_t workers, std::size_t window,
                      const std::function<void(std::size_t)>& fn, const std::function<void(std::size_t)>& consume) {
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
      consume(i);
    }
    return;
  }
  window = std::max(window, workers);
  std::mutex mu;
  std::condition_variable cv;
  std::vector<char> ready(n, 0);
  std::size_t next = 0;
  std::size_t consumed = 0;
  bool abort = false;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return abort || next >= n || next < consumed + window; });
        if (abort || next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        cv.notify_all();
        return;
      }
      std::lock_guard lock(mu);
      ready[i] = 1;
      cv.notify_all();
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);

  try {
    while (consumed < n) {
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return abort || ready[consumed] != 0; });
        if (abort) break;
      }
      consume(consumed);
      std::lock_guard lock(mu);
      ++consumed;
      cv.notify_all();
    }
  } catch (...) {
    std::lock_guard lock(mu);
    if (!failure) failure = std::current_exception();
    abort = true;
    cv.notify_all();
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

IngestReport run_packages(const std::vector<ArticlePackage>& packages, const fs::path& root,
                          const IngestOptions& options) {
  if (options.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  io::AtomicFile corpus(options.out);
  io::AtomicFile skips(options.skip_log);
  std::optional<io::AtomicFile> pairs;
  if (options.pairs_out) pairs.emplace(*options.pairs_out);

  IngestReport report;
  std::vector<std::optional<ArticleResult>> results(packages.size());
  ordered_parallel(
      packages.size(), options.workers, 4 * options.workers,
      [&](std::size_t i) { results[i] = process_package(packages[i]); },
      [&](std::size_t i) {
        const ArticleResult& r = *results[i];
        ++report.articles_seen;
        switch (r.status) {
          case ArticleStatus::Emitted:
            ++report.articles_emitted;
            report.pairs_emitted += r.pairs.size();
            corpus.write(line(corpus_json(r.record)));
            if (pairs) {
              for (const auto& p : r.pairs) pairs->write(line(pair_json(p, root)));
            }
            break;
          case ArticleStatus::NoFigures: ++report.skipped_no_figures; break;
          case ArticleStatus::Malformed: ++report.skipped_malformed; break;
        }
        for (const auto& s : r.skips) {
          if (s.fig_id) ++report.figures_skipped;
          skips.write(line(skip_json(s)));
        }
        if (options.on_article) options.on_article(r);
        results[i].reset();
      });
  corpus.commit();
  skips.commit();
  if (pairs) pairs->commit();
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

IngestReport run_pipeline(const fs::path& root, const IngestOptions& options) {
  if (options.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  return run_packages(enumerate_packages(root), root, options);
}

nlohmann::ordered_json corpus_json(const jats::ArticleRecord& record) {
  nlohmann::ordered_json j;
  j["pmid"] = record.pmid ? nlohmann::ordered_json(*record.pmid) : nlohmann::ordered_json(nullptr);
  j["pmcid"] = record.pmcid;
  auto figures = nlohmann::ordered_json::array();
  for (const auto& f : record.figures) {
    nlohmann::ordered_json fj;
    fj["fig_id"] = f.fig_id;
    fj["graphic_ref"] = f.graphic_ref;
    fj["caption"] = f.caption;
    figures.push_back(std::move(fj));
  }
  j["figures"] = std::move(figures);
  j["body_paragraphs"] = record.body_paragraphs;
  return j;
}

nlohmann::ordered_json pair_json(const jats::FigurePair& pair, const fs::path& root) {
  nlohmann::ordered_json j;
  j["pmid"] = pair.pmid ? nlohmann::ordered_json(*pair.pmid) : nlohmann::ordered_json(nullptr);
  j["pmcid"] = pair.pmcid;
  j["fig_id"] = pair.fig_id;
  const fs::path rel = pair.image_path.lexically_relative(root);
  j["image_path"] = (rel.empty() ? pair.image_path : rel).generic_string();
  j["caption"] = pair.caption;
  return j;
}

nlohmann::ordered_json skip_json(const SkipEntry& entry) {
  nlohmann::ordered_json j;
  j["pmcid"] = entry.pmcid;
  j["reason"] = std::string(to_string(entry.reason));
  if (entry.fig_id) j["fig_id"] = *entry.fig_id;
  if (entry.detail) j["detail"] = *entry.detail;
  return j;
}

nlohmann::ordered_json to_json(const IngestReport& r, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["articles_seen"] = r.articles_seen;
  j["articles_emitted"] = r.articles_emitted;
  j["skipped_no_figures"] = r.skipped_no_figures;
  j["skipped_malformed"] = r.skipped_malformed;
  j["pairs_emitted"] = r.pairs_emitted;
  j["figures_skipped"] = r.figures_skipped;
  if (include_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

}  // namespace figurelink::ingest
