#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace graphgrade {

/// Lower-cases UTF-8 text. Covers ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic; other code points pass through unchanged. Invalid bytes are kept as-is.
std::string utf8_lower(std::string_view text);

std::string trim(std::string_view text);

/// Entity identity: lower-case, trim, collapse internal whitespace runs to one space.
std::string canonicalize(std::string_view text);

/// Splits on ASCII whitespace. This is the token unit for chunking.
std::vector<std::string> split_whitespace(std::string_view text);

/// Lower-cased alphanumeric runs; non-ASCII bytes count as word characters.
/// Used for hashing embeddings and query term extraction.
std::vector<std::string> lexical_tokens(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::uint64_t fnv1a64(std::string_view bytes);

/// 16 lower-case hex digits.
std::string hex64(std::uint64_t value);

}  // namespace graphgrade
