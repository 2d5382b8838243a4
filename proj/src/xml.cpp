#include "figurelink/xml.hpp"

#include "figurelink/error.hpp"
#include "figurelink/text.hpp"

#include <charconv>

namespace figurelink::xml {

namespace {

bool is_name_start(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':' || u >= 0x80;
}

bool is_name_char(char c) noexcept {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

class Parser {
 public:
  explicit Parser(std::string_view doc) : doc_(doc) {}

  Node run() {
    if (!text::is_valid_utf8(doc_)) fail("invalid UTF-8");
    if (doc_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    skip_misc();
    if (at_end() || peek() != '<') fail("expected root element");
    std::vector<Node> stack;
    bool root_done = false;
    Node root;
    while (!root_done) {
      if (at_end()) fail("unexpected end of document inside <" + (stack.empty() ? std::string() : stack.back().name) + ">");
      if (peek() == '<') {
        if (starts_with("</")) {
          pos_ += 2;
          std::string name = read_name();
          skip_space();
          expect('>');
          if (stack.empty() || stack.back().name != name) fail("mismatched closing tag </" + name + ">");
          Node done = std::move(stack.back());
          stack.pop_back();
          if (stack.empty()) {
            root = std::move(done);
            root_done = true;
          } else {
            stack.back().children.push_back(std::move(done));
          }
        } else if (starts_with("<!--")) {
          skip_comment();
        } else if (starts_with("<![CDATA[")) {
          if (stack.empty()) fail("CDATA outside root");
          pos_ += 9;
          const auto end = doc_.find("]]>", pos_);
          if (end == std::string_view::npos) fail("unterminated CDATA");
          append_text(stack.back(), std::string(doc_.substr(pos_, end - pos_)));
          pos_ = end + 3;
        } else if (starts_with("<?")) {
          skip_pi();
        } else if (starts_with("<!")) {
          fail("unexpected markup declaration");
        } else {
          ++pos_;
          Node el;
          el.name = read_name();
          bool self_closing = read_attributes(el);
          if (self_closing) {
            if (stack.empty()) {
              root = std::move(el);
              root_done = true;
            } else {
              stack.back().children.push_back(std::move(el));
            }
          } else {
            stack.push_back(std::move(el));
          }
        }
      } else {
        if (stack.empty()) fail("character data outside root");
        append_text(stack.back(), read_char_data());
      }
    }
    skip_misc();
    if (!at_end()) fail("content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::MalformedXml, what + " at byte " + std::to_string(pos_));
  }

  bool at_end() const noexcept { return pos_ >= doc_.size(); }
  char peek() const noexcept { return doc_[pos_]; }
  bool starts_with(std::string_view s) const noexcept { return doc_.substr(pos_, s.size()) == s; }

  void expect(char c) {
    if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_space() {
    while (!at_end() && text::is_ascii_space(peek())) ++pos_;
  }

  std::string read_name() {
    if (at_end() || !is_name_start(peek())) fail("invalid name");
    const std::size_t start = pos_;
    while (!at_end() && is_name_char(peek())) ++pos_;
    return std::string(doc_.substr(start, pos_ - start));
  }

  void skip_comment() {
    const auto end = doc_.find("-->", pos_ + 4);
    if (end == std::string_view::npos) fail("unterminated comment");
    pos_ = end + 3;
  }

  void skip_pi() {
    const auto end = doc_.find("?>", pos_ + 2);
    if (end == std::string_view::npos) fail("unterminated processing instruction");
    pos_ = end + 2;
  }

  void skip_doctype() {
    pos_ += 9;
    int bracket = 0;
    while (!at_end()) {
      const char c = peek();
      if (c == '"' || c == '\'') {
        const auto end = doc_.find(c, pos_ + 1);
        if (end == std::string_view::npos) break;
        pos_ = end + 1;
        continue;
      }
      if (c == '[') ++bracket;
      if (c == ']') --bracket;
      ++pos_;
      if (c == '>' && bracket <= 0) return;
    }
    fail("unterminated DOCTYPE");
  }

  // Prolog/epilog: whitespace, comments, PIs, one DOCTYPE.
  void skip_misc() {
    while (true) {
      skip_space();
      if (starts_with("<!--")) {
        skip_comment();
      } else if (starts_with("<?")) {
        skip_pi();
      } else if (starts_with("<!DOCTYPE")) {
        skip_doctype();
      } else {
        return;
      }
    }
  }

  // Returns true when the tag is self-closing.
  bool read_attributes(Node& el) {
    while (true) {
      const std::size_t before = pos_;
      skip_space();
      if (at_end()) fail("unterminated start tag <" + el.name + ">");
      if (peek() == '>') {
        ++pos_;
        return false;
      }
      if (starts_with("/>")) {
        pos_ += 2;
        return true;
      }
      if (pos_ == before) fail("expected whitespace before attribute");
      std::string name = read_name();
      skip_space();
      expect('=');
      skip_space();
      if (at_end()) fail("unterminated attribute");
      const char quote = peek();
      if (quote != '"' && quote != '\'') fail("unquoted attribute value");
      ++pos_;
      const auto end = doc_.find(quote, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      const std::string_view raw = doc_.substr(pos_, end - pos_);
      if (raw.find('<') != std::string_view::npos) fail("'<' in attribute value");
      std::string value = decode_entities(raw, pos_);
      pos_ = end + 1;
      for (const auto& [existing, _] : el.attributes) {
        if (existing == name) fail("duplicate attribute " + name);
      }
      el.attributes.emplace_back(std::move(name), std::move(value));
    }
  }

  std::string read_char_data() {
    const std::size_t start = pos_;
    const auto end = doc_.find('<', pos_);
    pos_ = end == std::string_view::npos ? doc_.size() : end;
    return decode_entities(doc_.substr(start, pos_ - start), start);
  }

  std::string decode_entities(std::string_view raw, std::size_t base) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
      const char c = raw[i];
      if (c != '&') {
        out.push_back(c);
        ++i;
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) {
        pos_ = base + i;
        fail("unterminated entity reference");
      }
      const std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (!ent.empty() && ent[0] == '#') {
        std::uint32_t cp = 0;
        const bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
        const std::string_view digits = ent.substr(hex ? 2 : 1);
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
        if (digits.empty() || res.ec != std::errc() || res.ptr != digits.data() + digits.size() || cp == 0 ||
            !text::append_utf8(out, cp)) {
          pos_ = base + i;
          fail("invalid character reference &" + std::string(ent) + ";");
        }
      } else if (ent == "amp") {
        out.push_back('&');
      } else if (ent == "lt") {
        out.push_back('<');
      } else if (ent == "gt") {
        out.push_back('>');
      } else if (ent == "quot") {
        out.push_back('"');
      } else if (ent == "apos") {
        out.push_back('\'');
      } else {
        pos_ = base + i;
        fail("undeclared entity &" + std::string(ent) + ";");
      }
      i = semi + 1;
    }
    return out;
  }

  static void append_text(Node& parent, std::string data) {
    if (data.empty()) return;
    if (!parent.children.empty() && parent.children.back().kind == Node::Kind::Text) {
      parent.children.back().text += data;
      return;
    }
    Node t;
    t.kind = Node::Kind::Text;
    t.text = std::move(data);
    parent.children.push_back(std::move(t));
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

void collect_text(const Node& n, std::string& out) {
  if (n.kind == Node::Kind::Text) {
    out += n.text;
    return;
  }
  for (const auto& c : n.children) collect_text(c, out);
}

}  // namespace

const std::string* Node::attribute(std::string_view attr) const noexcept {
  for (const auto& [k, v] : attributes) {
    if (k == attr) return &v;
  }
  if (attr.find(':') == std::string_view::npos) {
    for (const auto& [k, v] : attributes) {
      const auto colon = k.find(':');
      if (colon != std::string::npos && std::string_view(k).substr(colon + 1) == attr) return &v;
    }
  }
  return nullptr;
}

std::string Node::text_content() const {
  std::string out;
  collect_text(*this, out);
  return out;
}

const Node* Node::first_child(std::string_view element_name) const noexcept {
  for (const auto& c : children) {
    if (c.is_element(element_name)) return &c;
  }
  return nullptr;
}

Node parse(std::string_view document) { return Parser(document).run(); }

void walk(const Node& root, const std::function<bool(const Node&)>& visit) {
  if (!root.is_element()) return;
  if (!visit(root)) return;
  for (const auto& c : root.children) walk(c, visit);
}

std::string escape(std::string_view raw, bool attribute) {
  std::string out;
  out.reserve(raw.size());
  for (const char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
        } else {
          out.push_back(c);
        }
        break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace figurelink::xml
