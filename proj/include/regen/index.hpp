#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regen/embedding_io.hpp"
#include "regen/hnsw.hpp"
#include "regen/vector_store.hpp"

namespace regen {

enum class IndexMode : std::uint8_t { exact = 0, approximate = 1 };

struct IndexParams {
    std::size_t M = 16;
    std::size_t ef_construction = 100;
    std::size_t ef_search = 320;
    std::uint64_t seed = 42;
};

struct ScoredHit {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredHit&) const = default;
};

// Top-k maximum-inner-product search over a frozen set of vectors. Hits come
// back in non-increasing score order with ties broken by ascending doc id;
// scores are always the exact dot products of the stored float vectors.
class VectorIndex {
public:
    VectorIndex() = default;

    // Throws ConfigError on dimension mismatch, duplicate ids or non-finite
    // values.
    static VectorIndex build(const std::vector<EmbeddingRecord>& records, std::size_t dim,
                             IndexMode mode = IndexMode::exact, const IndexParams& params = {});

    // min(k, size()) hits. Throws ConfigError on dimension mismatch or k == 0.
    std::vector<ScoredHit> top_k(std::span<const float> query, std::size_t k) const;

    // Same as calling top_k per query; queries fan out across threads.
    std::vector<std::vector<ScoredHit>> batch_top_k(const std::vector<std::vector<float>>& queries,
                                                    std::size_t k) const;

    std::size_t size() const noexcept { return store_.size(); }
    std::size_t dim() const noexcept { return store_.dim(); }
    IndexMode mode() const noexcept { return mode_; }
    const IndexParams& params() const noexcept { return params_; }
    const VectorStore& store() const noexcept { return store_; }

    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

private:
    std::vector<ScoredHit> search(std::span<const float> query, std::size_t k) const;

    VectorStore store_;
    IndexMode mode_ = IndexMode::exact;
    IndexParams params_;
    std::optional<HnswGraph> graph_;
};

const char* to_string(IndexMode mode);

}  // namespace regen
