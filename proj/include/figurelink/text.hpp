#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace figurelink::text {

bool is_valid_utf8(std::string_view s) noexcept;

/// Appends the UTF-8 encoding of a code point; returns false for surrogates or out-of-range values.
bool append_utf8(std::string& out, std::uint32_t code_point);

/// Decodes one code point at `pos` and advances it. Input must be valid UTF-8.
std::uint32_t decode_utf8(std::string_view s, std::size_t& pos) noexcept;

/// ICU NFC normalization of valid UTF-8.
std::string nfc(std::string_view s);

bool is_unicode_space(std::uint32_t code_point) noexcept;

/// Collapses runs of Unicode whitespace to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// NFC followed by whitespace collapse; the canonical form for stored text.
std::string normalize(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

bool is_ascii_space(char c) noexcept;

/// Number of code points that are not whitespace.
std::size_t count_non_space(std::string_view s);

/// Splits on Unicode whitespace; bytes that are not valid UTF-8 split on ASCII whitespace only.
std::vector<std::string> split_whitespace(std::string_view s);

std::string to_upper_ascii(std::string_view s);

}  // namespace figurelink::text
