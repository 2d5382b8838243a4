#pragma once

#include "figurelink/jats.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace figurelink::captioner {

/// Half-open byte range into the source caption.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  bool operator==(const Span&) const = default;
};

struct SubCaption {
  std::string label;  // canonical: "A", "B1", "II", "3"
  std::string text;
  Span char_span;

  bool operator==(const SubCaption&) const = default;
};

struct CaptionSplit {
  std::string preamble;
  Span preamble_span;
  std::vector<SubCaption> parts;  // ranges such as "(A-C)" give one part per label, sharing text and span
  std::vector<Span> label_tokens;  // the "(A)" markers themselves

  /// Distinct labels in document order.
  std::vector<std::string> labels() const;
};

/// Ordered label-token patterns. The first pattern matching at a position wins.
/// Loaded from a versioned text file so that fixtures pin the behaviour:
///
///     version = 1
///     unit = <regex for one label unit>
///     joiner = <regex between units>
///     pattern <name> = <regex; {labels} expands to unit(joiner unit)*, group 1 = label list>
class LabelGrammar {
 public:
  struct Pattern {
    std::string name;
    std::string source;
    std::regex regex;
  };

  static LabelGrammar from_text(std::string_view config);
  static LabelGrammar load(const std::filesystem::path& path);
  /// The grammar compiled into the library; identical to data/label_patterns.v1.txt.
  static const LabelGrammar& builtin();
  static std::string_view builtin_text() noexcept;

  int version() const noexcept { return version_; }
  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }
  const std::regex& joiner() const noexcept { return joiner_; }

 private:
  int version_ = 0;
  std::vector<Pattern> patterns_;
  std::regex joiner_;
};

/// Splits a caption into an unlabeled preamble and label-keyed sub-captions.
///
/// A caption is labeled only when its first label token that follows a sentence boundary
/// (caption start, or ". ", ": ", "; ") is a sequence start: A/a, i/I or 1.
/// Later tokens are accepted when they continue the sequence with the same kind and case:
/// the immediate successor anywhere after whitespace, a larger value only after a boundary.
/// Lowercase and bracketed forms canonicalize to bare uppercase; roman numerals
/// stay roman ("ii" -> "II").
CaptionSplit split_caption(std::string_view caption, const LabelGrammar& grammar = LabelGrammar::builtin());

/// Sentences of a paragraph. A split happens after '.', '!' or '?' followed by whitespace and
/// an uppercase letter, except after the abbreviations Fig. Figs. et al. e.g. i.e. vs. No. ca.
std::vector<std::string> split_sentences(std::string_view paragraph);

struct Citance {
  std::string sentence;
  std::string target_fig_id;
  std::vector<std::string> label_refs;  // canonical panel labels; empty means figure-level
  std::size_t paragraph_index = 0;

  bool figure_level() const noexcept { return label_refs.empty(); }
  bool operator==(const Citance&) const = default;
};

/// One figure mention inside a sentence: "Fig. 2B" -> {figure "2", panels {B}}.
struct FigureMention {
  std::string figure_key;  // "2", "S1"
  std::vector<std::string> panels;
};

/// All figure mentions of a sentence ("Fig. 2", "Figure 2", "Figs. 2 and 3", "Fig. 2A-C").
std::vector<FigureMention> find_mentions(std::string_view sentence);

/// Key under which a figure is cited: the number in its label ("Figure 2" -> "2"),
/// else the trailing digits of its id ("f2" -> "2"). Empty when neither exists.
std::string figure_key(const jats::FigureEntry& figure);

/// One citance per (sentence, cited figure). A sentence that mentions the figure without a
/// panel anywhere is figure-level.
std::vector<Citance> extract_citances(const std::vector<std::string>& body_paragraphs,
                                      const std::vector<jats::FigureEntry>& figures);

struct UnknownLabelRef {
  std::size_t citance_index;
  std::string label;
};

struct CitanceAssignment {
  std::map<std::string, std::vector<Citance>> by_label;  // key "" when the figure has no labels
  std::map<std::string, std::vector<bool>> figure_level;  // parallel to by_label
  std::vector<UnknownLabelRef> unknown;
};

/// Assigns citances to panel labels. Figure-level citances go to every label.
CitanceAssignment split_citances(const std::vector<Citance>& citances, const std::vector<std::string>& labels);

/// One fine-grained text line per (figure, label).
nlohmann::ordered_json subcaption_line(const std::string& pmcid, const std::string& fig_id,
                                       const std::string* label, const std::string& sub_caption,
                                       const std::vector<Citance>& citances, bool figure_level);

}  // namespace figurelink::captioner
