#include "figurelink/captioner.hpp"

#include "figurelink/error.hpp"
#include "figurelink/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

namespace figurelink::captioner {

namespace {

constexpr std::string_view kBuiltinGrammar = R"(# Label-token grammar for compound-figure captions.
# Patterns are tried in order at every position that follows whitespace or the caption start;
# the first match wins. {labels} expands to unit(joiner unit)* and is capture group 1.
version = 1
unit = [A-Za-z]{1,4}[0-9]?|[0-9]{1,2}
joiner = \s*(?:,|and|&|-|–|—|−)\s*
pattern paren = \(\s*({labels})\s*\)
pattern bracket = \[\s*({labels})\s*\]
pattern close = ({labels})\)
pattern dot = ({labels})\.
pattern colon = ({labels})[ ]?:
)";

// ---------------------------------------------------------------------------
// Label values

enum class Kind { Letter, Roman, Digit };

struct LabelValue {
  Kind kind = Kind::Letter;
  bool upper = true;
  int ordinal = 0;
  int sub = 0;  // "B1" -> ordinal 2, sub 1

  auto key() const noexcept { return std::tuple(ordinal, sub); }
};

std::string to_roman(int v) {
  static constexpr std::array<std::pair<int, std::string_view>, 6> kTable = {{
      {40, "xl"}, {10, "x"}, {9, "ix"}, {5, "v"}, {4, "iv"}, {1, "i"},
  }};
  std::string out;
  for (const auto& [n, s] : kTable) {
    while (v >= n) {
      out += s;
      v -= n;
    }
  }
  return out;
}

std::optional<int> roman_value(std::string_view s) {
  if (s.empty() || s.size() > 5) return std::nullopt;
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  int total = 0;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const char c = lower[i];
    const int v = c == 'i' ? 1 : c == 'v' ? 5 : c == 'x' ? 10 : 0;
    if (v == 0) return std::nullopt;
    const char nx = i + 1 < lower.size() ? lower[i + 1] : '\0';
    const int nv = nx == 'i' ? 1 : nx == 'v' ? 5 : nx == 'x' ? 10 : 0;
    total += v < nv ? -v : v;
  }
  if (total <= 0 || to_roman(total) != lower) return std::nullopt;
  return total;
}

bool all_same_case(std::string_view s, bool& upper) {
  bool any_upper = false;
  bool any_lower = false;
  for (const char c : s) {
    if (c >= 'A' && c <= 'Z') any_upper = true;
    if (c >= 'a' && c <= 'z') any_lower = true;
  }
  upper = any_upper;
  return !(any_upper && any_lower);
}

// Every reading of one unit string; a single i/v/x is both a letter and a numeral.
std::vector<LabelValue> interpretations(std::string_view unit) {
  std::vector<LabelValue> out;
  if (unit.empty()) return out;
  const bool digits = std::all_of(unit.begin(), unit.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (digits) {
    const int v = std::stoi(std::string(unit));
    if (v >= 1) out.push_back({Kind::Digit, true, v, 0});
    return out;
  }
  const char first = unit[0];
  const bool is_letter = (first >= 'A' && first <= 'Z') || (first >= 'a' && first <= 'z');
  if (!is_letter) return out;
  const bool upper = first >= 'A' && first <= 'Z';
  const int ord = std::tolower(static_cast<unsigned char>(first)) - 'a' + 1;
  if (unit.size() == 1) {
    out.push_back({Kind::Letter, upper, ord, 0});
  } else if (unit.size() == 2 && unit[1] >= '1' && unit[1] <= '9') {
    out.push_back({Kind::Letter, upper, ord, unit[1] - '0'});
    return out;
  }
  bool roman_upper = true;
  if (all_same_case(unit, roman_upper)) {
    if (auto rv = roman_value(unit)) out.push_back({Kind::Roman, roman_upper, *rv, 0});
  }
  return out;
}

std::string canonical(const LabelValue& v) {
  switch (v.kind) {
    case Kind::Digit: return std::to_string(v.ordinal);
    case Kind::Roman: return text::to_upper_ascii(to_roman(v.ordinal));
    case Kind::Letter: {
      std::string s(1, static_cast<char>('A' + v.ordinal - 1));
      if (v.sub > 0) s += std::to_string(v.sub);
      return s;
    }
  }
  return {};
}

struct Mode {
  Kind kind;
  bool upper;
};

std::optional<LabelValue> reading(std::string_view unit, const Mode& mode) {
  for (const auto& v : interpretations(unit)) {
    if (v.kind != mode.kind) continue;
    if (v.kind != Kind::Digit && v.upper != mode.upper) continue;
    return v;
  }
  return std::nullopt;
}

struct LabelList {
  std::vector<std::string> units;
  std::vector<bool> range_before;  // range_before[i]: joiner between unit i-1 and i is a dash
};

LabelList tokenize_labels(const std::string& group, const std::regex& joiner) {
  LabelList out;
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(group.begin(), group.end(), joiner); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::size_t at = static_cast<std::size_t>(m.position(0));
    const std::string piece = m.str(0);
    out.units.push_back(group.substr(last, at - last));
    const bool dash = piece.find('-') != std::string::npos || piece.find("\xE2\x80\x93") != std::string::npos ||
                      piece.find("\xE2\x80\x94") != std::string::npos || piece.find("\xE2\x88\x92") != std::string::npos;
    out.range_before.push_back(dash);
    last = at + static_cast<std::size_t>(m.length(0));
  }
  out.units.push_back(group.substr(last));
  out.range_before.insert(out.range_before.begin(), false);
  return out;
}

// Expands "A-C, E" under a mode; nullopt when any unit does not read in that mode.
std::optional<std::vector<LabelValue>> expand(const LabelList& list, const Mode& mode) {
  std::vector<LabelValue> out;
  for (std::size_t i = 0; i < list.units.size(); ++i) {
    auto v = reading(list.units[i], mode);
    if (!v) return std::nullopt;
    if (list.range_before[i] && !out.empty()) {
      const LabelValue from = out.back();
      if (from.ordinal == v->ordinal && v->sub > from.sub) {
        for (int s = from.sub + 1; s < v->sub; ++s) out.push_back({from.kind, from.upper, from.ordinal, s});
      } else if (from.sub == 0 && v->sub == 0 && v->ordinal > from.ordinal && v->ordinal - from.ordinal <= 26) {
        for (int o = from.ordinal + 1; o < v->ordinal; ++o) out.push_back({from.kind, from.upper, o, 0});
      } else {
        return std::nullopt;
      }
    }
    if (!out.empty() && !(out.back().key() < v->key())) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

bool is_successor(const LabelValue& last, const LabelValue& next) {
  if (next.ordinal == last.ordinal) return next.sub == last.sub + 1;
  return next.ordinal == last.ordinal + 1 && next.sub <= 1;
}

bool is_sequence_start(const LabelValue& v) { return v.ordinal == 1 && v.sub <= 1; }

struct Candidate {
  Span token;
  LabelList labels;
  bool boundary = false;
  bool delimited = false;  // bracketed or closed with ')': may continue a sequence mid-sentence
};

bool preceded_by_boundary(std::string_view caption, std::size_t pos) {
  while (pos > 0 && text::is_ascii_space(caption[pos - 1])) --pos;
  if (pos == 0) return true;
  const char c = caption[pos - 1];
  return c == '.' || c == ':' || c == ';';
}

std::vector<Candidate> scan_candidates(std::string_view caption, const LabelGrammar& grammar) {
  std::vector<Candidate> out;
  const std::string owned(caption);
  std::size_t p = 0;
  while (p < owned.size()) {
    if (p > 0 && !text::is_ascii_space(owned[p - 1])) {
      ++p;
      continue;
    }
    const char c = owned[p];
    const bool start_char = c == '(' || c == '[' || std::isalnum(static_cast<unsigned char>(c));
    bool matched = false;
    if (start_char) {
      for (const auto& pattern : grammar.patterns()) {
        std::smatch m;
        auto flags = std::regex_constants::match_continuous;
        if (p > 0) flags |= std::regex_constants::match_prev_avail;
        if (!std::regex_search(owned.cbegin() + static_cast<std::ptrdiff_t>(p), owned.cend(), m, pattern.regex, flags)) {
          continue;
        }
        const std::size_t end = p + static_cast<std::size_t>(m.length(0));
        if (end < owned.size() && !text::is_ascii_space(owned[end])) continue;
        if (m.size() < 2 || !m[1].matched) continue;
        Candidate cand;
        cand.token = {p, end};
        cand.labels = tokenize_labels(m.str(1), grammar.joiner());
        cand.boundary = preceded_by_boundary(caption, p);
        const std::string tok = m.str(0);
        cand.delimited = tok.find(')') != std::string::npos || tok.find(']') != std::string::npos;
        out.push_back(std::move(cand));
        p = end;
        matched = true;
        break;
      }
    }
    if (!matched) ++p;
  }
  return out;
}

Span trimmed(std::string_view s, std::size_t start, std::size_t end) {
  while (start < end && text::is_ascii_space(s[start])) ++start;
  while (end > start && text::is_ascii_space(s[end - 1])) --end;
  return {start, end};
}

std::regex compile(const std::string& source, const std::string& what) {
  try {
    return std::regex(source, std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::ConfigError, "label grammar " + what + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Grammar

LabelGrammar LabelGrammar::from_text(std::string_view config) {
  LabelGrammar g;
  std::string unit;
  std::string joiner;
  std::vector<std::pair<std::string, std::string>> raw_patterns;
  std::istringstream in{std::string(config)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find(" = ");
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "label grammar line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(text::trim(t.substr(0, eq)));
    const std::string value(t.substr(eq + 3));
    if (key == "version") {
      g.version_ = std::stoi(value);
    } else if (key == "unit") {
      unit = value;
    } else if (key == "joiner") {
      joiner = value;
    } else if (key.rfind("pattern ", 0) == 0) {
      raw_patterns.emplace_back(std::string(text::trim(std::string_view(key).substr(8))), value);
    } else {
      throw Error(ErrorCode::ConfigError, "label grammar: unknown key '" + key + "'");
    }
  }
  if (g.version_ < 1 || unit.empty() || joiner.empty() || raw_patterns.empty()) {
    throw Error(ErrorCode::ConfigError, "label grammar needs version, unit, joiner and at least one pattern");
  }
  const std::string labels = "(?:" + unit + ")(?:" + joiner + "(?:" + unit + "))*";
  g.joiner_ = compile(joiner, "joiner");
  for (auto& [name, source] : raw_patterns) {
    std::string expanded = source;
    const std::string slot = "{labels}";
    for (auto at = expanded.find(slot); at != std::string::npos; at = expanded.find(slot, at + labels.size())) {
      expanded.replace(at, slot.size(), labels);
    }
    g.patterns_.push_back({name, source, compile(expanded, "pattern " + name)});
  }
  return g;
}

LabelGrammar LabelGrammar::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read label grammar " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

const LabelGrammar& LabelGrammar::builtin() {
  static const LabelGrammar g = from_text(kBuiltinGrammar);
  return g;
}

std::string_view LabelGrammar::builtin_text() noexcept { return kBuiltinGrammar; }

// ---------------------------------------------------------------------------
// Caption splitting

std::vector<std::string> CaptionSplit::labels() const {
  std::vector<std::string> out;
  for (const auto& p : parts) {
    if (std::find(out.begin(), out.end(), p.label) == out.end()) out.push_back(p.label);
  }
  return out;
}

CaptionSplit split_caption(std::string_view caption, const LabelGrammar& grammar) {
  const auto candidates = scan_candidates(caption, grammar);

  struct Accepted {
    std::size_t candidate;
    Span token;
    std::vector<LabelValue> values;
  };
  std::vector<bool> banned(candidates.size(), false);

  auto accept = [&] {
    std::vector<Accepted> accepted;
    std::optional<Mode> mode;
    LabelValue last;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (banned[c]) continue;
      const auto& cand = candidates[c];
      // A marker with nothing after it ends the caption as text.
      if (trimmed(caption, cand.token.end, caption.size()).size() == 0) continue;
      if (!mode) {
        if (!cand.boundary) continue;
        // The first boundary token decides: a sequence start or an unlabeled caption.
        const auto first = interpretations(cand.labels.units.front());
        std::optional<Mode> chosen;
        for (const auto& v : first) {
          if (!is_sequence_start(v)) continue;
          // "i" starts a roman sequence, never the ninth letter.
          if (!chosen || v.kind == Kind::Roman) chosen = Mode{v.kind, v.upper};
        }
        if (!chosen) break;
        auto values = expand(cand.labels, *chosen);
        if (!values) break;
        mode = chosen;
        last = values->back();
        accepted.push_back({c, cand.token, std::move(*values)});
        continue;
      }
      auto values = expand(cand.labels, *mode);
      if (!values) continue;
      const LabelValue& head = values->front();
      if (!(last.key() < head.key())) continue;
      const bool successor = is_successor(last, head);
      if (!(cand.boundary || (successor && cand.delimited))) continue;
      last = values->back();
      accepted.push_back({c, cand.token, std::move(*values)});
    }
    return accepted;
  };

  auto text_span = [&](const std::vector<Accepted>& accepted, std::size_t i) {
    const std::size_t text_end = i + 1 < accepted.size() ? accepted[i + 1].token.start : caption.size();
    return trimmed(caption, accepted[i].token.end, text_end);
  };

  // A token whose text would itself split again is not a label: "A. a: x" reads as text.
  std::vector<Accepted> accepted = accept();
  for (bool stable = false; !stable;) {
    stable = true;
    for (std::size_t i = 0; i < accepted.size(); ++i) {
      const Span span = text_span(accepted, i);
      if (split_caption(caption.substr(span.start, span.size()), grammar).parts.empty()) continue;
      banned[accepted[i].candidate] = true;
      accepted = accept();
      stable = false;
      break;
    }
  }

  CaptionSplit out;
  if (accepted.empty()) {
    out.preamble_span = trimmed(caption, 0, caption.size());
    out.preamble = std::string(caption.substr(out.preamble_span.start, out.preamble_span.size()));
    return out;
  }
  out.preamble_span = trimmed(caption, 0, accepted.front().token.start);
  out.preamble = std::string(caption.substr(out.preamble_span.start, out.preamble_span.size()));
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    out.label_tokens.push_back(accepted[i].token);
    const Span span = text_span(accepted, i);
    const std::string sub(caption.substr(span.start, span.size()));
    for (const auto& v : accepted[i].values) out.parts.push_back({canonical(v), sub, span});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentences and mentions

namespace {

constexpr std::array kAbbreviations = {
    std::string_view("fig."), std::string_view("figs."), std::string_view("al."), std::string_view("e.g."),
    std::string_view("i.e."), std::string_view("vs."),   std::string_view("no."), std::string_view("ca."),
};

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with_abbreviation(std::string_view para, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !text::is_ascii_space(para[b - 1])) --b;
  std::string_view word = para.substr(b, dot - b + 1);
  while (!word.empty() && (word.front() == '(' || word.front() == '[' || word.front() == '"')) word.remove_prefix(1);
  const std::string w = lower_ascii(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), w) != kAbbreviations.end();
}

bool is_letter(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class MentionParser {
 public:
  explicit MentionParser(std::string_view s) : s_(s) {}

  std::vector<FigureMention> run() {
    std::vector<FigureMention> out;
    std::size_t i = 0;
    while (i < s_.size()) {
      if (!keyword_at(i, i)) {
        ++i;
        continue;
      }
      parse_items(i, out);
    }
    return out;
  }

 private:
  // "Fig", "Figs", "Figure", "Figures", optional '.', then whitespace; `next` lands after it.
  bool keyword_at(std::size_t at, std::size_t& next) const {
    if (at > 0 && is_letter(s_[at - 1])) return false;
    if (lower_ascii(s_.substr(at, 3)) != "fig") return false;
    std::size_t j = at + 3;
    if (lower_ascii(s_.substr(j, 3)) == "ure") j += 3;
    if (j < s_.size() && s_[j] == 's') ++j;
    if (j < s_.size() && s_[j] == '.') ++j;
    if (j < s_.size() && is_letter(s_[j])) return false;
    while (j < s_.size() && (s_[j] == ' ' || s_[j] == '\t')) ++j;
    if (j >= s_.size() || !(is_digit(s_[j]) || (s_[j] == 'S' && j + 1 < s_.size() && is_digit(s_[j + 1])))) {
      return false;
    }
    next = j;
    return true;
  }

  std::size_t skip_spaces(std::size_t j) const {
    while (j < s_.size() && (s_[j] == ' ' || s_[j] == '\t')) ++j;
    return j;
  }

  // Dash-like joiner at j; returns its byte length or 0.
  std::size_t dash_at(std::size_t j) const {
    if (j >= s_.size()) return 0;
    if (s_[j] == '-') return 1;
    const auto three = s_.substr(j, 3);
    if (three == "\xE2\x80\x93" || three == "\xE2\x80\x94" || three == "\xE2\x88\x92") return 3;
    return 0;
  }

  std::size_t list_joiner_at(std::size_t j) const {
    if (j >= s_.size()) return 0;
    if (s_[j] == ',' || s_[j] == '&' || s_[j] == '/') {
      std::size_t k = skip_spaces(j + 1);
      if (s_.substr(k, 3) == "and" && (k + 3 >= s_.size() || !is_letter(s_[k + 3]))) return k + 3 - j;
      return 1;
    }
    if (s_.substr(j, 3) == "and" && (j + 3 >= s_.size() || !is_letter(s_[j + 3]))) return 3;
    return 0;
  }

  bool single_letter_at(std::size_t j) const {
    return j < s_.size() && is_letter(s_[j]) && (j + 1 >= s_.size() || !(is_letter(s_[j + 1]) || is_digit(s_[j + 1])));
  }

  bool number_at(std::size_t j, std::string& key, std::size_t& end) const {
    std::string prefix;
    if (j < s_.size() && s_[j] == 'S' && j + 1 < s_.size() && is_digit(s_[j + 1])) {
      prefix = "S";
      ++j;
    }
    if (j >= s_.size() || !is_digit(s_[j])) return false;
    std::size_t k = j;
    while (k < s_.size() && is_digit(s_[k])) ++k;
    key = prefix + std::string(s_.substr(j, k - j));
    end = k;
    return true;
  }

  static std::string up(char c) { return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c)))); }

  void parse_panels(std::size_t& i, std::vector<std::string>& panels) const {
    if (!(i < s_.size() && is_letter(s_[i]))) return;
    // Panels attach directly to the number: "2A", not "2 nd".
    if (i + 1 < s_.size() && is_letter(s_[i + 1])) return;
    panels.push_back(up(s_[i]));
    ++i;
    while (true) {
      const std::size_t save = i;
      std::size_t j = skip_spaces(i);
      if (const std::size_t d = dash_at(j)) {
        j = skip_spaces(j + d);
        if (single_letter_at(j)) {
          const char from = panels.back()[0];
          const char to = up(s_[j])[0];
          for (char c = static_cast<char>(from + 1); c <= to && to - from <= 26; ++c) panels.emplace_back(1, c);
          i = j + 1;
          continue;
        }
      } else if (const std::size_t l = list_joiner_at(j)) {
        j = skip_spaces(j + l);
        if (single_letter_at(j)) {
          panels.push_back(up(s_[j]));
          i = j + 1;
          continue;
        }
      }
      i = save;
      return;
    }
  }

  void parse_items(std::size_t& i, std::vector<FigureMention>& out) const {
    std::string key;
    std::size_t end = 0;
    while (number_at(i, key, end)) {
      i = end;
      FigureMention m{key, {}};
      parse_panels(i, m.panels);
      out.push_back(m);
      const std::size_t save = i;
      std::size_t j = skip_spaces(i);
      if (const std::size_t d = dash_at(j)) {
        std::size_t k = skip_spaces(j + d);
        std::string to_key;
        std::size_t to_end = 0;
        if (number_at(k, to_key, to_end) && !key.empty() && is_digit(key[0]) && is_digit(to_key[0])) {
          const int from = std::stoi(key);
          const int to = std::stoi(to_key);
          for (int n = from + 1; n < to && to - from <= 50; ++n) out.push_back({std::to_string(n), {}});
          i = k;
          continue;
        }
      } else if (const std::size_t l = list_joiner_at(j)) {
        std::size_t k = skip_spaces(j + l);
        std::size_t after_kw = k;
        if (keyword_at(k, after_kw)) k = after_kw;
        if (number_at(k, key, end)) {
          i = k;
          continue;
        }
      }
      i = save;
      return;
    }
  }

  std::string_view s_;
};

}  // namespace

std::vector<std::string> split_sentences(std::string_view para) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < para.size(); ++i) {
    const char c = para[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= para.size() || !text::is_ascii_space(para[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < para.size() && text::is_ascii_space(para[j])) ++j;
    if (j >= para.size() || !(para[j] >= 'A' && para[j] <= 'Z')) continue;
    if (c == '.' && ends_with_abbreviation(para, i)) continue;
    const auto s = text::trim(para.substr(start, i + 1 - start));
    if (!s.empty()) out.emplace_back(s);
    start = j;
    i = j - 1;
  }
  const auto tail = text::trim(para.substr(std::min(start, para.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::vector<FigureMention> find_mentions(std::string_view sentence) { return MentionParser(sentence).run(); }

std::string figure_key(const jats::FigureEntry& figure) {
  if (figure.label_text) {
    const std::string& l = *figure.label_text;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (!is_digit(l[i])) continue;
      std::size_t k = i;
      while (k < l.size() && is_digit(l[k])) ++k;
      const bool supplementary = i > 0 && l[i - 1] == 'S';
      return (supplementary ? "S" : "") + l.substr(i, k - i);
    }
  }
  const std::string& id = figure.fig_id;
  std::size_t k = id.size();
  while (k > 0 && is_digit(id[k - 1])) --k;
  if (k == id.size()) return {};
  return id.substr(k);
}

std::vector<Citance> extract_citances(const std::vector<std::string>& body_paragraphs,
                                      const std::vector<jats::FigureEntry>& figures) {
  std::map<std::string, std::vector<const jats::FigureEntry*>> by_key;
  for (const auto& f : figures) {
    const std::string key = figure_key(f);
    if (!key.empty()) by_key[key].push_back(&f);
  }
  std::vector<Citance> out;
  for (std::size_t pi = 0; pi < body_paragraphs.size(); ++pi) {
    for (auto& sentence : split_sentences(body_paragraphs[pi])) {
      const auto mentions = find_mentions(sentence);
      // Targets in order of first mention; a bare mention makes the citance figure-level.
      std::vector<std::string> order;
      std::map<std::string, std::pair<std::set<std::string>, bool>> merged;
      for (const auto& m : mentions) {
        if (!by_key.count(m.figure_key)) continue;
        auto [it, inserted] = merged.try_emplace(m.figure_key);
        if (inserted) order.push_back(m.figure_key);
        if (m.panels.empty()) {
          it->second.second = true;
        } else {
          it->second.first.insert(m.panels.begin(), m.panels.end());
        }
      }
      for (const auto& key : order) {
        const auto& [panels, bare] = merged[key];
        for (const auto* fig : by_key[key]) {
          Citance c;
          c.sentence = sentence;
          c.target_fig_id = fig->fig_id;
          c.paragraph_index = pi;
          if (!bare) c.label_refs.assign(panels.begin(), panels.end());
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

CitanceAssignment split_citances(const std::vector<Citance>& citances, const std::vector<std::string>& labels) {
  CitanceAssignment out;
  const std::set<std::string> known(labels.begin(), labels.end());
  auto put = [&](const std::string& label, const Citance& c) {
    out.by_label[label].push_back(c);
    out.figure_level[label].push_back(c.figure_level());
  };
  for (std::size_t i = 0; i < citances.size(); ++i) {
    const Citance& c = citances[i];
    if (c.figure_level()) {
      if (labels.empty()) {
        put("", c);
      } else {
        for (const auto& l : labels) put(l, c);
      }
      continue;
    }
    for (const auto& ref : c.label_refs) {
      if (known.count(ref)) {
        put(ref, c);
      } else {
        out.unknown.push_back({i, ref});
      }
    }
  }
  return out;
}

nlohmann::ordered_json subcaption_line(const std::string& pmcid, const std::string& fig_id, const std::string* label,
                                       const std::string& sub_caption, const std::vector<Citance>& citances,
                                       bool figure_level) {
  nlohmann::ordered_json j;
  j["pmcid"] = pmcid;
  j["fig_id"] = fig_id;
  j["label"] = label != nullptr ? nlohmann::ordered_json(*label) : nlohmann::ordered_json(nullptr);
  j["sub_caption"] = sub_caption;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : citances) arr.push_back(c.sentence);
  j["citances"] = std::move(arr);
  j["figure_level"] = figure_level;
  return j;
}

}  // namespace figurelink::captioner
