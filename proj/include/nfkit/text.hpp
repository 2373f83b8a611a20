#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace nfkit::text {

struct Utf8Repair {
  std::string text;
  std::size_t replacements = 0;
};

// Replaces every invalid UTF-8 sequence with U+FFFD.
Utf8Repair repair_utf8(std::string_view bytes);

std::string latin1_to_utf8(std::string_view bytes);

// Number of Unicode code points in valid UTF-8 text.
std::size_t codepoint_count(std::string_view utf8);

std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);

// Collapses runs of spaces and tabs to a single space, drops spaces adjacent
// to line breaks, turns CRLF into LF and trims both ends. Line breaks are
// kept.
std::string normalize_whitespace(std::string_view s);

// True when the text still contains something shaped like an HTML tag.
bool contains_tag_like(std::string_view s);

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9');
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

}  // namespace nfkit::text
