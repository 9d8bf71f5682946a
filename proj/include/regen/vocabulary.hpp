#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace regen {

// Frequency-built vocabulary of whole words plus character-trigram pieces
// ("#abc", with '<' and '>' marking word boundaries). Words missing from the
// vocabulary fall back to whichever of their trigrams are present.
class Vocabulary {
public:
    static constexpr std::size_t kDefaultCap = 32768;

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> entries);

    // Words take up to 3/4 of cap, trigram pieces fill the rest. Ordering is
    // by descending count, then lexicographic, so the result is deterministic.
    static Vocabulary build(std::span<const std::string> texts, std::size_t cap = kDefaultCap,
                            std::size_t min_count = 1);

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<std::string>& entries() const noexcept { return entries_; }
    std::optional<std::uint32_t> lookup(std::string_view piece) const;

    // Token ids for text, stopping after max_tokens ids. `truncated` is set
    // when ids were dropped.
    std::vector<std::uint32_t> encode(std::string_view text, std::size_t max_tokens,
                                      bool* truncated = nullptr) const;

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// "#<ab", "#abc", ... for a word; exposed for tests.
std::vector<std::string> word_trigrams(std::string_view word);

}  // namespace regen
