#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace oncopipe::text {

bool valid_utf8(std::string_view s);

// Number of Unicode scalar values. Throws InputError on invalid UTF-8.
// This is the character-counting unit used everywhere in this project.
std::size_t scalar_count(std::string_view s);

// Decodes the scalar starting at byte offset i and advances i past it.
// Returns U+FFFD and advances one byte on invalid input.
char32_t next_scalar(std::string_view s, std::size_t& i);

void append_utf8(std::string& out, char32_t cp);

// Maps accented Latin letters to their unaccented equivalents; other
// scalars pass through unchanged.
std::string strip_accents(std::string_view s);

}  // namespace oncopipe::text
