#include "regen/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "regen/error.hpp"

namespace regen {

VectorStore::VectorStore(std::size_t dim, const std::vector<EmbeddingRecord>& records) : dim_(dim) {
    data_.reserve(records.size() * dim);
    ids_.reserve(records.size());
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records) {
        if (r.vector.size() != dim)
            throw ConfigError("vector '" + r.id + "' has dimension " + std::to_string(r.vector.size()) + ", expected " +
                              std::to_string(dim));
        if (!seen.insert(r.id).second) throw ConfigError("duplicate vector id '" + r.id + "'");
        for (float v : r.vector)
            if (!std::isfinite(v)) throw ConfigError("vector '" + r.id + "' has a non-finite component");
        data_.insert(data_.end(), r.vector.begin(), r.vector.end());
        ids_.push_back(r.id);
    }
    std::vector<std::uint32_t> order(ids_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return ids_[a] < ids_[b]; });
    id_rank_.resize(ids_.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) id_rank_[order[r]] = r;
}

std::vector<EmbeddingRecord> VectorStore::records() const {
    std::vector<EmbeddingRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        const auto v = vector(i);
        out.push_back({ids_[i], std::vector<float>(v.begin(), v.end())});
    }
    return out;
}

}  // namespace regen
