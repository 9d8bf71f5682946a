#include "regen/vocabulary.hpp"

#include <algorithm>
#include <map>

#include "regen/error.hpp"
#include "regen/text.hpp"

namespace regen {

Vocabulary::Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    index_.reserve(entries_.size());
    for (std::uint32_t i = 0; i < entries_.size(); ++i) {
        if (!index_.emplace(entries_[i], i).second) throw FormatError("duplicate vocabulary entry '" + entries_[i] + "'");
    }
}

std::vector<std::string> word_trigrams(std::string_view word) {
    const std::string padded = "<" + std::string(word) + ">";
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) out.push_back("#" + padded.substr(i, 3));
    return out;
}

namespace {

std::vector<std::string> top_by_count(const std::unordered_map<std::string, std::size_t>& counts,
                                      std::size_t limit, std::size_t min_count) {
    std::vector<std::pair<std::string, std::size_t>> items;
    for (const auto& [piece, count] : counts)
        if (count >= min_count) items.emplace_back(piece, count);
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (items.size() > limit) items.resize(limit);
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& item : items) out.push_back(std::move(item.first));
    return out;
}

}  // namespace

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t cap, std::size_t min_count) {
    if (cap == 0) throw ConfigError("vocabulary cap must be positive");
    std::unordered_map<std::string, std::size_t> word_counts;
    for (const auto& text : texts)
        for (auto& word : tokenize_words(text)) ++word_counts[std::move(word)];

    const std::size_t word_budget = std::max<std::size_t>(1, cap * 3 / 4);
    auto entries = top_by_count(word_counts, word_budget, min_count);

    std::unordered_map<std::string, std::size_t> trigram_counts;
    for (const auto& [word, count] : word_counts)
        for (auto& tri : word_trigrams(word)) trigram_counts[std::move(tri)] += count;
    auto trigrams = top_by_count(trigram_counts, cap - entries.size(), min_count);
    entries.insert(entries.end(), std::make_move_iterator(trigrams.begin()), std::make_move_iterator(trigrams.end()));
    return Vocabulary(std::move(entries));
}

std::optional<std::uint32_t> Vocabulary::lookup(std::string_view piece) const {
    auto it = index_.find(std::string(piece));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::uint32_t> Vocabulary::encode(std::string_view text, std::size_t max_tokens, bool* truncated) const {
    std::vector<std::uint32_t> ids;
    if (truncated) *truncated = false;
    const auto push = [&](std::uint32_t id) {
        if (ids.size() < max_tokens) {
            ids.push_back(id);
            return true;
        }
        if (truncated) *truncated = true;
        return false;
    };
    for (const auto& word : tokenize_words(text)) {
        if (auto id = lookup(word)) {
            if (!push(*id)) break;
            continue;
        }
        bool full = false;
        for (const auto& tri : word_trigrams(word)) {
            if (auto id = lookup(tri); id && !push(*id)) {
                full = true;
                break;
            }
        }
        if (full) break;
    }
    return ids;
}

}  // namespace regen
