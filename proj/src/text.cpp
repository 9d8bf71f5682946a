#include "regen/text.hpp"

#include <cctype>

namespace regen {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::size_t count_whitespace_tokens(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == '[') {
            // Skip bracketed markers like [SEP] / [CLS].
            const auto close = text.find(']', i);
            if (close != std::string_view::npos && close - i <= 8) {
                bool marker = close > i + 1;
                for (std::size_t j = i + 1; j < close; ++j) {
                    if (!std::isupper(static_cast<unsigned char>(text[j]))) marker = false;
                }
                if (marker) {
                    if (!current.empty()) tokens.push_back(std::move(current));
                    current.clear();
                    i = close + 1;
                    continue;
                }
            }
        }
        if (is_word_char(c)) {
            current.push_back(c >= 0x80 ? static_cast<char>(c) : static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        ++i;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
    std::string out;
    std::size_t taken = 0;
    std::size_t i = 0;
    while (i < text.size() && taken < max_tokens) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i == text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(start, i - start));
        ++taken;
    }
    return out;
}

}  // namespace regen
