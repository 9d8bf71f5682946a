#include "regen/kernels.hpp"

#include <algorithm>
#include <queue>

#include <omp.h>

#include "regen/error.hpp"

namespace regen::kernels {

namespace {

// Bounded selection over store[begin, end). The heap top is the worst kept
// candidate under RankBefore.
std::vector<Candidate> select_range(const VectorStore& store, std::span<const float> query, std::size_t k,
                                    std::size_t begin, std::size_t end) {
    const RankBefore before{&store};
    std::priority_queue<Candidate, std::vector<Candidate>, RankBefore> heap(before);
    for (std::size_t i = begin; i < end; ++i) {
        const Candidate c{i, dot(query, store.vector(i))};
        if (heap.size() < k) {
            heap.push(c);
        } else if (before(c, heap.top())) {
            heap.pop();
            heap.push(c);
        }
    }
    std::vector<Candidate> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

void check_query(const VectorStore& store, std::span<const float> query) {
    if (query.size() != store.dim())
        throw ConfigError("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                          std::to_string(store.dim()));
}

}  // namespace

std::vector<Candidate> scan_topk_serial(const VectorStore& store, std::span<const float> query, std::size_t k) {
    check_query(store, query);
    if (k == 0 || store.empty()) return {};
    return select_range(store, query, k, 0, store.size());
}

std::vector<Candidate> scan_topk_parallel(const VectorStore& store, std::span<const float> query, std::size_t k) {
    check_query(store, query);
    if (k == 0 || store.empty()) return {};
    const int threads = std::max(1, std::min<int>(omp_get_max_threads(), static_cast<int>(store.size() / 2048) + 1));
    if (threads == 1) return select_range(store, query, k, 0, store.size());

    std::vector<std::vector<Candidate>> partial(threads);
    const std::size_t chunk = (store.size() + threads - 1) / threads;
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int t = 0; t < threads; ++t) {
        const std::size_t begin = std::min(store.size(), static_cast<std::size_t>(t) * chunk);
        const std::size_t end = std::min(store.size(), begin + chunk);
        partial[t] = select_range(store, query, k, begin, end);
    }
    std::vector<Candidate> merged;
    for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
    const RankBefore before{&store};
    const std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end(), before);
    merged.resize(keep);
    return merged;
}

std::vector<std::vector<Candidate>> batch_scan_topk_serial(const VectorStore& store,
                                                           const std::vector<std::vector<float>>& queries,
                                                           std::size_t k) {
    std::vector<std::vector<Candidate>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(scan_topk_serial(store, q, k));
    return out;
}

std::vector<std::vector<Candidate>> batch_scan_topk_parallel(const VectorStore& store,
                                                             const std::vector<std::vector<float>>& queries,
                                                             std::size_t k) {
    for (const auto& q : queries) check_query(store, q);
    std::vector<std::vector<Candidate>> out(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
        out[i] = scan_topk_serial(store, queries[i], k);
    }
    return out;
}

std::vector<EmbedResult> embed_batch_serial(const Embedder& embedder, std::span<const std::string> texts) {
    std::vector<EmbedResult> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embedder.embed(t));
    return out;
}

std::vector<EmbedResult> embed_batch_parallel(const Embedder& embedder, std::span<const std::string> texts) {
    std::vector<EmbedResult> out(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i) {
        out[i] = embedder.embed(texts[i]);
    }
    return out;
}

int max_threads() { return omp_get_max_threads(); }

void set_max_threads(int n) {
    if (n >= 1) omp_set_num_threads(n);
}

}  // namespace regen::kernels
