#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "regen/encoder.hpp"
#include "regen/vector_store.hpp"

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP variant; the two must return identical results.
namespace regen::kernels {

struct Candidate {
    std::size_t index = 0;
    double score = 0.0;
};

// Total order used everywhere hits are ranked: higher score first, then
// smaller id rank.
struct RankBefore {
    const VectorStore* store;
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.score != b.score) return a.score > b.score;
        return store->id_rank(a.index) < store->id_rank(b.index);
    }
};

// Exact top-k by dot product, sorted by RankBefore.
std::vector<Candidate> scan_topk_serial(const VectorStore& store, std::span<const float> query, std::size_t k);
std::vector<Candidate> scan_topk_parallel(const VectorStore& store, std::span<const float> query, std::size_t k);

std::vector<std::vector<Candidate>> batch_scan_topk_serial(const VectorStore& store,
                                                           const std::vector<std::vector<float>>& queries,
                                                           std::size_t k);
std::vector<std::vector<Candidate>> batch_scan_topk_parallel(const VectorStore& store,
                                                             const std::vector<std::vector<float>>& queries,
                                                             std::size_t k);

std::vector<EmbedResult> embed_batch_serial(const Embedder& embedder, std::span<const std::string> texts);
std::vector<EmbedResult> embed_batch_parallel(const Embedder& embedder, std::span<const std::string> texts);

// Threads OpenMP will use for the parallel variants.
int max_threads();
// Caps OpenMP threads; values < 1 are ignored.
void set_max_threads(int n);

}  // namespace regen::kernels
