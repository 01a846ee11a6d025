#pragma once

#include <cstdint>
#include <string>
#include <string_view>

// Small UTF-8 toolkit. Letter classification and case folding cover the
// Latin, Greek, Cyrillic, Armenian, Hebrew, Arabic and CJK blocks, which is
// what mail in the target languages (English, Romanian) actually contains.
namespace mailgraph::unicode {

inline constexpr char32_t replacement_char = 0xFFFD;

/// Decodes one code point starting at `pos` and advances `pos`. Invalid or
/// truncated sequences yield U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view text, std::size_t& pos) noexcept;

void append_utf8(std::string& out, char32_t cp);

bool is_letter(char32_t cp) noexcept;
bool is_digit(char32_t cp) noexcept;
char32_t to_lower(char32_t cp) noexcept;

/// Replaces every invalid UTF-8 byte with U+FFFD. Returns true if the input was valid.
bool sanitize_utf8(std::string_view in, std::string& out);

/// Maps each byte to the code point of the same value.
std::string latin1_to_utf8(std::string_view in);

}  // namespace mailgraph::unicode
