#include "figurelink/jats.hpp"

#include "figurelink/error.hpp"
#include "figurelink/text.hpp"
#include "figurelink/xml.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace figurelink::jats {

namespace {

constexpr std::array kBlockElements = {
    std::string_view("p"),         std::string_view("title"),         std::string_view("list"),
    std::string_view("list-item"), std::string_view("disp-quote"),    std::string_view("disp-formula"),
    std::string_view("def-list"),  std::string_view("def-item"),      std::string_view("term"),
    std::string_view("def"),       std::string_view("sec"),           std::string_view("break"),
    std::string_view("label"),     std::string_view("caption"),       std::string_view("attrib"),
};

bool is_block(std::string_view name) {
  return std::find(kBlockElements.begin(), kBlockElements.end(), name) != kBlockElements.end();
}

void render_text(const xml::Node& node, std::string& out) {
  if (node.kind == xml::Node::Kind::Text) {
    out += node.text;
    return;
  }
  if (node.name == "alternatives") {
    for (const auto& c : node.children) {
      if (c.is_element()) {
        render_text(c, out);
        break;
      }
    }
    return;
  }
  const bool block = is_block(node.name);
  if (block) out.push_back(' ');
  for (const auto& c : node.children) render_text(c, out);
  if (block) out.push_back(' ');
}

std::string element_text(const xml::Node& node) {
  std::string raw;
  for (const auto& c : node.children) render_text(c, raw);
  return text::normalize(raw);
}

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < s.size()) {
    text::decode_utf8(s, pos);
    ++n;
  }
  return n;
}

struct IdScan {
  std::optional<std::string> pmid;
  std::optional<std::string> pmcid;
};

void scan_ids(const xml::Node& root, IdScan& ids) {
  xml::walk(root, [&](const xml::Node& n) {
    if (n.name == "body" || n.name == "back" || n.name == "ref-list" || n.name == "floats-group") return false;
    if (n.name == "sub-article" || n.name == "response") return false;
    if (n.name != "article-id") return true;
    const std::string* type = n.attribute("pub-id-type");
    if (type == nullptr) return false;
    std::string value = text::collapse_whitespace(n.text_content());
    if (value.empty()) return false;
    if ((*type == "pmc" || *type == "pmcid") && !ids.pmcid) {
      if (value.rfind("PMC", 0) != 0) value = "PMC" + value;
      ids.pmcid = value;
    } else if (*type == "pmid" && !ids.pmid) {
      ids.pmid = value;
    }
    return false;
  });
}

const xml::Node* find_own_graphic(const xml::Node& fig) {
  const xml::Node* found = nullptr;
  for (const auto& c : fig.children) {
    if (found != nullptr) break;
    if (!c.is_element() || c.name == "fig" || c.name == "fig-group") continue;
    xml::walk(c, [&](const xml::Node& n) {
      if (found != nullptr || n.name == "fig") return false;
      if (n.name == "graphic" && n.attribute("href") != nullptr) {
        found = &n;
        return false;
      }
      return true;
    });
  }
  return found;
}

class FigureCollector {
 public:
  explicit FigureCollector(ArticleRecord& rec) : rec_(rec) {}

  void visit(const xml::Node& node, const std::optional<std::string>& parent) {
    for (const auto& c : node.children) {
      if (!c.is_element()) continue;
      if (c.name == "table-wrap" || c.name == "table-wrap-group") continue;
      if (c.name == "fig") {
        const std::string* id = c.attribute("id");
        add_figure(c, parent);
        visit(c, id != nullptr && !id->empty() ? std::optional<std::string>(*id) : parent);
      } else if (c.name == "fig-group") {
        const std::string* id = c.attribute("id");
        visit(c, id != nullptr && !id->empty() ? std::optional<std::string>(*id) : parent);
      } else {
        visit(c, parent);
      }
    }
  }

 private:
  void add_figure(const xml::Node& fig, const std::optional<std::string>& parent) {
    const std::string* id_attr = fig.attribute("id");
    const std::string id = id_attr != nullptr ? std::string(text::trim(*id_attr)) : std::string();
    if (id.empty()) {
      rec_.skipped_figures.push_back({"", FigureSkipReason::MissingId});
      return;
    }
    FigureEntry entry;
    entry.fig_id = id;
    entry.parent_id = parent;
    if (const xml::Node* label = fig.first_child("label")) {
      std::string l = element_text(*label);
      if (!l.empty()) entry.label_text = std::move(l);
    }
    if (const xml::Node* caption = fig.first_child("caption")) entry.caption = element_text(*caption);
    if (code_points(entry.caption) < kMinCaptionLength) {
      rec_.skipped_figures.push_back({id, FigureSkipReason::EmptyCaption});
      return;
    }
    const xml::Node* graphic = find_own_graphic(fig);
    if (graphic != nullptr) entry.graphic_ref = graphic_stem(*graphic->attribute("href"));
    if (entry.graphic_ref.empty()) {
      rec_.skipped_figures.push_back({id, FigureSkipReason::NoGraphic});
      return;
    }
    if (!seen_.insert(id).second) {
      rec_.skipped_figures.push_back({id, FigureSkipReason::DuplicateId});
      return;
    }
    rec_.figures.push_back(std::move(entry));
  }

  ArticleRecord& rec_;
  std::set<std::string> seen_;
};

void collect_paragraphs(const xml::Node& body, std::vector<std::string>& out) {
  xml::walk(body, [&](const xml::Node& n) {
    if (n.name == "fig" || n.name == "fig-group" || n.name == "table-wrap" || n.name == "table-wrap-group") {
      return false;
    }
    if (n.name == "p") {
      std::string t = element_text(n);
      if (!t.empty()) out.push_back(std::move(t));
      return false;
    }
    return true;
  });
}

}  // namespace

std::string_view to_string(FigureSkipReason reason) noexcept {
  switch (reason) {
    case FigureSkipReason::NoGraphic: return "no_graphic";
    case FigureSkipReason::EmptyCaption: return "empty_caption";
    case FigureSkipReason::MissingId: return "missing_id";
    case FigureSkipReason::DuplicateId: return "duplicate_id";
  }
  return "unknown";
}

std::string graphic_stem(std::string_view href) {
  std::string_view s = text::trim(href);
  const auto slash = s.find_last_of("/\\");
  if (slash != std::string_view::npos) s = s.substr(slash + 1);
  const auto dot = s.find_last_of('.');
  if (dot != std::string_view::npos && dot > 0) s = s.substr(0, dot);
  return std::string(s);
}

ArticleRecord read_article(std::string_view xml_bytes) {
  const xml::Node root = xml::parse(xml_bytes);
  ArticleRecord rec;
  IdScan ids;
  scan_ids(root, ids);
  if (!ids.pmcid) throw Error(ErrorCode::MissingPmcid, "no article-id with pub-id-type pmc");
  rec.pmcid = *ids.pmcid;
  rec.pmid = ids.pmid;

  FigureCollector(rec).visit(root, std::nullopt);
  if (const xml::Node* body = root.first_child("body")) collect_paragraphs(*body, rec.body_paragraphs);
  return rec;
}

ArticleRecord parse_article(std::string_view xml_bytes) {
  ArticleRecord rec = read_article(xml_bytes);
  if (rec.figures.empty()) {
    throw Error(ErrorCode::NoFigures, rec.pmcid + " has no figure with both caption and graphic");
  }
  return rec;
}

std::string to_jats_xml(const ArticleRecord& record) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<article xmlns:xlink=\"http://www.w3.org/1999/xlink\">\n<front><article-meta>\n";
  if (record.pmid) out += "<article-id pub-id-type=\"pmid\">" + xml::escape(*record.pmid) + "</article-id>\n";
  out += "<article-id pub-id-type=\"pmc\">" + xml::escape(record.pmcid) + "</article-id>\n";
  out += "</article-meta></front>\n<body>\n";
  for (const auto& p : record.body_paragraphs) out += "<p>" + xml::escape(p) + "</p>\n";
  out += "</body>\n<floats-group>\n";
  // Nested figures are re-emitted inside a fig-group carrying the parent id.
  for (const auto& f : record.figures) {
    const bool nested = f.parent_id.has_value();
    if (nested) out += "<fig-group id=\"" + xml::escape(*f.parent_id, true) + "\">";
    out += "<fig id=\"" + xml::escape(f.fig_id, true) + "\">";
    if (f.label_text) out += "<label>" + xml::escape(*f.label_text) + "</label>";
    out += "<caption><p>" + xml::escape(f.caption) + "</p></caption>";
    out += "<graphic xlink:href=\"" + xml::escape(f.graphic_ref, true) + "\"/>";
    out += "</fig>";
    if (nested) out += "</fig-group>";
    out += "\n";
  }
  out += "</floats-group>\n</article>\n";
  return out;
}

PairExtraction extract_pairs(const ArticleRecord& record, const MediaIndex& media_index) {
  PairExtraction out;
  for (const auto& f : record.figures) {
    const auto it = media_index.find(f.graphic_ref);
    if (it == media_index.end()) {
      out.unresolved.push_back(f.fig_id);
      continue;
    }
    out.pairs.push_back({record.pmid, record.pmcid, f.fig_id, it->second, f.caption});
  }
  return out;
}

}  // namespace figurelink::jats
