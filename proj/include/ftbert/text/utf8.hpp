#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ftbert::utf8 {

/// Splits into code-point substrings. A malformed byte becomes its own unit.
std::vector<std::string> split_chars(std::string_view text);

/// Decoded code point of the first character of `ch` (0xFFFD when malformed).
char32_t decode(std::string_view ch);

bool is_whitespace(char32_t cp);
/// ASCII punctuation plus the CJK/fullwidth/general punctuation blocks.
bool is_punctuation(char32_t cp);
bool is_cjk_ideograph(char32_t cp);

/// ASCII-only lowercasing.
std::string to_lower(std::string_view text);

}  // namespace ftbert::utf8
