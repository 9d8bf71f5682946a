#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace regen {

// Number of whitespace-delimited tokens, no normalization.
std::size_t count_whitespace_tokens(std::string_view text);

// Lowercased word tokens split on whitespace and ASCII punctuation. Bytes
// >= 0x80 are kept as word characters so UTF-8 sequences stay intact.
// Bracketed markers such as "[SEP]" and "[CLS]" are dropped.
std::vector<std::string> tokenize_words(std::string_view text);

// Keeps the first max_tokens whitespace tokens of text, joined by one space.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

}  // namespace regen
