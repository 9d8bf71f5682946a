#include "regen/index.hpp"

#include <algorithm>
#include <fstream>

#include "regen/error.hpp"
#include "regen/kernels.hpp"

namespace regen {

namespace {

constexpr char kIndexMagic[4] = {'R', 'G', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

HnswGraph::Params graph_params(const IndexParams& p) { return {p.M, p.ef_construction, p.seed}; }

}  // namespace

const char* to_string(IndexMode mode) { return mode == IndexMode::exact ? "exact" : "approximate"; }

VectorIndex VectorIndex::build(const std::vector<EmbeddingRecord>& records, std::size_t dim, IndexMode mode,
                               const IndexParams& params) {
    if (dim == 0) throw ConfigError("index dimension must be positive");
    if (params.ef_search == 0) throw ConfigError("index ef_search must be positive");
    VectorIndex index;
    index.store_ = VectorStore(dim, records);
    index.mode_ = mode;
    index.params_ = params;
    if (mode == IndexMode::approximate) index.graph_ = HnswGraph::build(index.store_, graph_params(params));
    return index;
}

std::vector<ScoredHit> VectorIndex::search(std::span<const float> query, std::size_t k) const {
    std::vector<kernels::Candidate> ranked;
    if (mode_ == IndexMode::exact) {
        ranked = kernels::scan_topk_serial(store_, query, k);
    } else {
        for (std::size_t i : graph_->search(store_, query, std::max(k, params_.ef_search)))
            ranked.push_back({i, dot(query, store_.vector(i))});
        const kernels::RankBefore before{&store_};
        std::sort(ranked.begin(), ranked.end(), before);
        if (ranked.size() > k) ranked.resize(k);
    }
    std::vector<ScoredHit> hits;
    hits.reserve(ranked.size());
    for (const auto& c : ranked) hits.push_back({store_.id(c.index), c.score});
    return hits;
}

std::vector<ScoredHit> VectorIndex::top_k(std::span<const float> query, std::size_t k) const {
    if (k == 0) throw ConfigError("top_k: k must be at least 1");
    if (query.size() != store_.dim())
        throw ConfigError("top_k: query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                          std::to_string(store_.dim()));
    return search(query, k);
}

std::vector<std::vector<ScoredHit>> VectorIndex::batch_top_k(const std::vector<std::vector<float>>& queries,
                                                             std::size_t k) const {
    if (k == 0) throw ConfigError("batch_top_k: k must be at least 1");
    for (const auto& q : queries)
        if (q.size() != store_.dim()) throw ConfigError("batch_top_k: query dimension mismatch");
    std::vector<std::vector<ScoredHit>> out(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
        out[i] = search(queries[i], k);
    }
    return out;
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_embeddings(out, store_.records(), static_cast<std::uint32_t>(store_.dim()));
    out.write(kIndexMagic, 4);
    binio::put_u32(out, kIndexVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(mode_));
    binio::put_u32(out, static_cast<std::uint32_t>(params_.M));
    binio::put_u32(out, static_cast<std::uint32_t>(params_.ef_construction));
    binio::put_u32(out, static_cast<std::uint32_t>(params_.ef_search));
    binio::put_u64(out, params_.seed);
    if (graph_) graph_->write(out);
    if (!out) throw Error("failed writing index " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        auto file = read_embeddings(in);
        binio::expect_magic(in, kIndexMagic, "index adjacency section");
        if (const auto v = binio::get_u32(in); v != kIndexVersion)
            throw FormatError("unsupported index version " + std::to_string(v));
        const auto mode = binio::get_u32(in);
        if (mode > 1) throw FormatError("unknown index mode " + std::to_string(mode));
        VectorIndex index;
        index.mode_ = static_cast<IndexMode>(mode);
        index.params_.M = binio::get_u32(in);
        index.params_.ef_construction = binio::get_u32(in);
        index.params_.ef_search = binio::get_u32(in);
        index.params_.seed = binio::get_u64(in);
        index.store_ = VectorStore(file.dim, file.records);
        if (index.mode_ == IndexMode::approximate)
            index.graph_ = HnswGraph::read(in, index.store_, graph_params(index.params_));
        return index;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace regen
