#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace regen {

struct Document {
    std::string id;
    std::string text;
    std::optional<std::string> source;
};

// Immutable, ingestion-ordered collection of documents with unique ids.
class Corpus {
public:
    Corpus() = default;
    // Throws ConfigError on empty or duplicate ids.
    explicit Corpus(std::vector<Document> documents);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }
    const Document& operator[](std::size_t i) const { return documents_[i]; }

    std::size_t token_count() const noexcept { return token_count_; }

    // Position of a document id, or nullopt.
    std::optional<std::size_t> find(std::string_view id) const;

    auto begin() const noexcept { return documents_.begin(); }
    auto end() const noexcept { return documents_.end(); }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t token_count_ = 0;
};

// Parses one JSONL corpus line. Throws FormatError naming line_no on failure.
Document parse_document_line(std::string_view line, std::size_t line_no);

// Reads every file in order, keeping records with at least min_words
// whitespace tokens. Rejects malformed lines, duplicate ids, and an empty
// result. Files are parsed concurrently; output order is file order.
Corpus load_corpus(const std::vector<std::filesystem::path>& paths, std::size_t min_words = 10);

void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Splits on '.', '!' and '?' runs. Each span keeps its terminal punctuation
// and leading whitespace between spans is dropped; a text without terminal
// punctuation comes back as a single span.
std::vector<std::string> split_sentences(std::string_view text);

struct ContrastivePair {
    std::string anchor_text;
    std::string positive_text;
    std::string doc_id;
};

// Draws n (anchor, positive) pairs: a document uniformly among those with at
// least two distinct sentences, then two distinct sentence positions whose
// texts differ. Deterministic in (corpus, n, seed).
std::vector<ContrastivePair> sample_pairs(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace regen
