#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "regen/vector_store.hpp"

namespace regen {

// Hierarchical navigable small-world graph for maximum inner product search.
//
// Both construction and search rank by the raw dot product (no reduction to
// Euclidean distance). Neighbor lists use the usual diversity heuristic: a
// candidate is dropped when an already kept neighbor is more similar to it
// than the node being linked.
class HnswGraph {
public:
    struct Params {
        std::size_t M = 16;
        std::size_t ef_construction = 100;
        std::uint64_t seed = 42;
    };

    HnswGraph() = default;

    // Inserts store vectors in order. Single-threaded and deterministic.
    static HnswGraph build(const VectorStore& store, const Params& params);

    // Up to ef candidate indices, best first by q.x.
    std::vector<std::size_t> search(const VectorStore& store, std::span<const float> query, std::size_t ef) const;

    std::size_t size() const noexcept { return links_.size(); }
    int max_level() const noexcept { return max_level_; }
    std::uint32_t entry_point() const noexcept { return entry_; }
    const std::vector<std::uint32_t>& neighbors(std::size_t node, int level) const { return links_[node][level]; }

    void write(std::ostream& out) const;
    // Reads adjacency for store (which must be the store it was built from).
    static HnswGraph read(std::istream& in, const VectorStore& store, const Params& params);

private:
    struct Scored {
        double sim;
        std::uint32_t node;
    };

    static double sim(const VectorStore& store, std::uint32_t a, std::uint32_t b);

    // Beam search on one layer. sim_to(node) gives similarity to the target.
    template <typename SimFn>
    std::vector<Scored> search_layer(SimFn&& sim_to, const std::vector<Scored>& entry, std::size_t ef, int level,
                                     std::vector<std::uint32_t>& visited, std::uint32_t& stamp) const;

    std::vector<std::uint32_t> select_neighbors(const VectorStore& store, std::vector<Scored> candidates,
                                                std::size_t limit) const;

    Params params_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;
    std::uint32_t entry_ = 0;
    int max_level_ = -1;
};

}  // namespace regen
