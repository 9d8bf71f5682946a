#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regen/embedding_io.hpp"

namespace regen {

// Contiguous n x dim float storage with ids and each id's rank in ascending
// byte order (used for deterministic tie-breaking).
class VectorStore {
public:
    VectorStore() = default;
    explicit VectorStore(std::size_t dim) : dim_(dim) {}
    // Throws ConfigError on dim mismatch, non-finite values or duplicate ids.
    VectorStore(std::size_t dim, const std::vector<EmbeddingRecord>& records);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    std::span<const float> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    std::uint32_t id_rank(std::size_t i) const { return id_rank_[i]; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<float>& data() const noexcept { return data_; }

    std::vector<EmbeddingRecord> records() const;

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::vector<std::string> ids_;
    std::vector<std::uint32_t> id_rank_;
};

// Dot product of float vectors accumulated in double, left to right.
inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

}  // namespace regen
