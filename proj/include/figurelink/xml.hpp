#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace figurelink::xml {

/// A node of a small non-validating XML DOM. Text nodes hold decoded character data.
struct Node {
  enum class Kind { Element, Text };

  Kind kind = Kind::Element;
  std::string name;  // qualified name, prefix kept ("xlink:href")
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;  // Text nodes only
  std::vector<Node> children;

  bool is_element() const noexcept { return kind == Kind::Element; }
  bool is_element(std::string_view n) const noexcept { return kind == Kind::Element && name == n; }

  /// Attribute by qualified name, or by local name when `name` has no prefix.
  const std::string* attribute(std::string_view attr) const noexcept;

  /// Concatenated descendant character data in document order.
  std::string text_content() const;

  const Node* first_child(std::string_view element_name) const noexcept;
};

/// Parses a complete document and returns its root element.
/// Throws Error(MalformedXml) on any well-formedness violation, including invalid UTF-8,
/// undeclared named entities, mismatched tags and trailing content.
Node parse(std::string_view document);

/// Pre-order walk over elements. The visitor returns false to skip a subtree.
void walk(const Node& root, const std::function<bool(const Node&)>& visit);

std::string escape(std::string_view raw, bool attribute = false);

}  // namespace figurelink::xml
