#include "regen/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>

#include "regen/embedding_io.hpp"
#include "regen/error.hpp"

namespace regen {

namespace {

struct WorseFirst {
    template <typename S>
    bool operator()(const S& a, const S& b) const {
        return a.sim != b.sim ? a.sim < b.sim : a.node > b.node;
    }
};

struct BetterFirst {
    template <typename S>
    bool operator()(const S& a, const S& b) const {
        return a.sim != b.sim ? a.sim > b.sim : a.node < b.node;
    }
};

}  // namespace

double HnswGraph::sim(const VectorStore& store, std::uint32_t a, std::uint32_t b) {
    return dot(store.vector(a), store.vector(b));
}

template <typename SimFn>
std::vector<HnswGraph::Scored> HnswGraph::search_layer(SimFn&& sim_to, const std::vector<Scored>& entry,
                                                       std::size_t ef, int level,
                                                       std::vector<std::uint32_t>& visited,
                                                       std::uint32_t& stamp) const {
    ++stamp;
    // max-heap of frontier (best on top), min-heap of results (worst on top)
    std::priority_queue<Scored, std::vector<Scored>, WorseFirst> frontier;
    std::priority_queue<Scored, std::vector<Scored>, BetterFirst> results;
    for (const auto& e : entry) {
        if (visited[e.node] == stamp) continue;
        visited[e.node] = stamp;
        frontier.push(e);
        results.push(e);
        if (results.size() > ef) results.pop();
    }
    while (!frontier.empty()) {
        const Scored current = frontier.top();
        if (results.size() >= ef && current.sim < results.top().sim) break;
        frontier.pop();
        for (std::uint32_t nb : links_[current.node][level]) {
            if (visited[nb] == stamp) continue;
            visited[nb] = stamp;
            const Scored cand{sim_to(nb), nb};
            if (results.size() < ef || cand.sim > results.top().sim) {
                frontier.push(cand);
                results.push(cand);
                if (results.size() > ef) results.pop();
            }
        }
    }
    std::vector<Scored> out;
    out.reserve(results.size());
    while (!results.empty()) {
        out.push_back(results.top());
        results.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<std::uint32_t> HnswGraph::select_neighbors(const VectorStore& store, std::vector<Scored> candidates,
                                                       std::size_t limit) const {
    std::sort(candidates.begin(), candidates.end(), BetterFirst{});
    std::vector<std::uint32_t> kept;
    for (const auto& c : candidates) {
        if (kept.size() >= limit) break;
        bool diverse = true;
        for (std::uint32_t r : kept) {
            if (sim(store, c.node, r) > c.sim) {
                diverse = false;
                break;
            }
        }
        if (diverse) kept.push_back(c.node);
    }
    return kept;
}

HnswGraph HnswGraph::build(const VectorStore& store, const Params& params) {
    if (params.M < 2) throw ConfigError("hnsw: M must be at least 2");
    if (params.ef_construction == 0) throw ConfigError("hnsw: ef_construction must be positive");
    if (store.size() > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("hnsw: too many vectors");

    HnswGraph g;
    g.params_ = params;
    const std::size_t n = store.size();
    g.links_.resize(n);
    if (n == 0) return g;

    std::mt19937_64 rng(params.seed);
    const double level_mult = 1.0 / std::log(static_cast<double>(params.M));
    std::vector<std::uint32_t> visited(n, 0);
    std::uint32_t stamp = 0;

    for (std::uint32_t i = 0; i < n; ++i) {
        // u in (0, 1]
        const double u = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
        const int level = static_cast<int>(std::floor(-std::log(u) * level_mult));
        g.links_[i].resize(level + 1);
        if (i == 0) {
            g.entry_ = 0;
            g.max_level_ = level;
            continue;
        }
        const auto sim_to = [&](std::uint32_t j) { return g.sim(store, i, j); };
        std::vector<Scored> ep{{sim_to(g.entry_), g.entry_}};
        for (int l = g.max_level_; l > level; --l) ep = g.search_layer(sim_to, ep, 1, l, visited, stamp);
        for (int l = std::min(level, g.max_level_); l >= 0; --l) {
            auto found = g.search_layer(sim_to, ep, params.ef_construction, l, visited, stamp);
            g.links_[i][l] = g.select_neighbors(store, found, params.M);
            const std::size_t cap = l == 0 ? 2 * params.M : params.M;
            for (std::uint32_t nb : g.links_[i][l]) {
                auto& nb_links = g.links_[nb][l];
                nb_links.push_back(i);
                if (nb_links.size() > cap) {
                    std::vector<Scored> cands;
                    cands.reserve(nb_links.size());
                    for (std::uint32_t c : nb_links) cands.push_back({g.sim(store, nb, c), c});
                    nb_links = g.select_neighbors(store, std::move(cands), cap);
                }
            }
            ep = std::move(found);
        }
        if (level > g.max_level_) {
            g.max_level_ = level;
            g.entry_ = i;
        }
    }
    return g;
}

std::vector<std::size_t> HnswGraph::search(const VectorStore& store, std::span<const float> query,
                                           std::size_t ef) const {
    if (links_.empty()) return {};
    std::vector<std::uint32_t> visited(links_.size(), 0);
    std::uint32_t stamp = 0;
    const auto sim_to = [&](std::uint32_t j) { return dot(query, store.vector(j)); };
    std::vector<Scored> ep{{sim_to(entry_), entry_}};
    for (int l = max_level_; l > 0; --l) ep = search_layer(sim_to, ep, 1, l, visited, stamp);
    const auto found = search_layer(sim_to, ep, std::max<std::size_t>(ef, 1), 0, visited, stamp);
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& s : found) out.push_back(s.node);
    return out;
}

void HnswGraph::write(std::ostream& out) const {
    binio::put_u32(out, entry_);
    binio::put_u32(out, static_cast<std::uint32_t>(max_level_ + 1));
    for (const auto& node : links_) {
        binio::put_u32(out, static_cast<std::uint32_t>(node.size()));
        for (const auto& layer : node) {
            binio::put_u32(out, static_cast<std::uint32_t>(layer.size()));
            for (std::uint32_t nb : layer) binio::put_u32(out, nb);
        }
    }
}

HnswGraph HnswGraph::read(std::istream& in, const VectorStore& store, const Params& params) {
    HnswGraph g;
    g.params_ = params;
    const std::size_t n = store.size();
    g.entry_ = binio::get_u32(in);
    g.max_level_ = static_cast<int>(binio::get_u32(in)) - 1;
    if (n > 0 && g.entry_ >= n) throw FormatError("hnsw: entry point out of range");
    g.links_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto levels = binio::get_u32(in);
        if (levels == 0 || static_cast<int>(levels) > g.max_level_ + 1) throw FormatError("hnsw: bad node level");
        g.links_[i].resize(levels);
        for (auto& layer : g.links_[i]) {
            const auto count = binio::get_u32(in);
            if (count > n) throw FormatError("hnsw: neighbor count out of range");
            layer.resize(count);
            for (auto& nb : layer) {
                nb = binio::get_u32(in);
                if (nb >= n) throw FormatError("hnsw: neighbor id out of range");
            }
        }
    }
    return g;
}

}  // namespace regen
