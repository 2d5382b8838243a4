#include "figurelink/config.hpp"

#include "figurelink/error.hpp"
#include "figurelink/io.hpp"
#include "figurelink/text.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

namespace figurelink::config {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 1) bad(key + " must be >= 1");
  return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) bad(key + ": expected a number, got '" + v + "'");
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key + ": expected true or false, got '" + v + "'");
}

std::string real_text(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"config_version",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.config_version = static_cast<int>(to_int(k, v));
       }},
      {"workers", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.workers = to_count(k, v); }},
      {"split.background_level",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.split.background_level = static_cast<int>(to_int(k, v));
       }},
      {"split.background_fraction",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.split.background_fraction = to_real(k, v);
       }},
      {"split.max_line_variance",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.split.max_line_variance = to_real(k, v);
       }},
      {"split.min_gutter_px",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.split.min_gutter_px = static_cast<int>(to_int(k, v));
       }},
      {"split.min_panel_frac",
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.split.min_panel_frac = to_real(k, v); }},
      {"label_patterns",
       [](PipelineConfig& c, const std::string&, const std::string& v) {
         if (v.empty()) {
           c.label_patterns.reset();
         } else {
           c.label_patterns = v;
         }
       }},
      {"label_patterns_version",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.label_patterns_version = static_cast<int>(to_int(k, v));
       }},
      {"k_values",
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.k_values = parse_k_values(v); }},
      {"ann.max_degree",
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ann.max_degree = to_count(k, v); }},
      {"ann.ef_construction",
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ann.ef_construction = to_count(k, v); }},
      {"ann.ef_search",
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ann.ef_search = to_count(k, v); }},
      {"ann.exhaustive",
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ann.exhaustive = to_bool(k, v); }},
  };
  return kSetters;
}

}  // namespace

void PipelineConfig::validate() const {
  if (config_version != kConfigVersion) bad("config_version " + std::to_string(config_version) + " is not supported");
  if (workers < 1 || workers > 1024) bad("workers must be in [1,1024]");
  split.validate();
  if (label_patterns_version < 1) bad("label_patterns_version must be >= 1");
  if (k_values.empty()) bad("k_values must not be empty");
  if (ann.max_degree > 256) bad("ann.max_degree must be in [1,256]");
}

std::string PipelineConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["config_version"] = std::to_string(config_version);
  kv["workers"] = std::to_string(workers);
  kv["split.background_level"] = std::to_string(split.background_level);
  kv["split.background_fraction"] = real_text(split.background_fraction);
  kv["split.max_line_variance"] = real_text(split.max_line_variance);
  kv["split.min_gutter_px"] = std::to_string(split.min_gutter_px);
  kv["split.min_panel_frac"] = real_text(split.min_panel_frac);
  kv["label_patterns"] = label_patterns ? label_patterns->generic_string() : "";
  kv["label_patterns_version"] = std::to_string(label_patterns_version);
  std::string ks;
  for (const auto k : k_values) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  kv["k_values"] = ks;
  kv["ann.max_degree"] = std::to_string(ann.max_degree);
  kv["ann.ef_construction"] = std::to_string(ann.ef_construction);
  kv["ann.ef_search"] = std::to_string(ann.ef_search);
  kv["ann.exhaustive"] = ann.exhaustive ? "true" : "false";
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void set_key(PipelineConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) bad("unknown config key '" + key + "'");
  it->second(config, key, value);
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
  }();
  return kKeys;
}

std::vector<std::size_t> parse_k_values(const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t(text::trim(item));
    const std::size_t k = to_count("k_values", t);
    if (!out.empty() && k <= out.back()) bad("k_values must be strictly increasing");
    out.push_back(k);
  }
  if (out.empty()) bad("k_values must not be empty");
  return out;
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = text::trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    const std::string where = "line " + std::to_string(lineno);
    if (eq == std::string_view::npos) bad(where + ": expected 'key = value'");
    const std::string key(text::trim(raw.substr(0, eq)));
    const std::string value(text::trim(raw.substr(eq + 1)));
    if (setters().count(key) == 0) bad("unknown config key '" + key + "' at " + where);
    if (!seen.insert(key).second) bad("config key '" + key + "' repeated at " + where);
    try {
      set_key(base, key, value);
    } catch (const Error& e) {
      bad(std::string(e.what()).substr(std::string(to_string(ErrorCode::ConfigError)).size() + 2) + " (" + where +
          ")");
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    bad("cannot read config file " + path.string());
  }
  return parse_config(text, std::move(base));
}

std::optional<std::size_t> env_workers() {
  const char* v = std::getenv("FIGURELINK_WORKERS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return to_count("FIGURELINK_WORKERS", v);
}

}  // namespace figurelink::config
