// Serial reference vs OpenMP variant for each kernel.
#include <benchmark/benchmark.h>

#include <random>

#include "regen/encoder.hpp"
#include "regen/kernels.hpp"
#include "regen/metrics.hpp"
#include "regen/synthetic.hpp"

namespace {

using namespace regen;

const VectorStore& store() {
    static const VectorStore s = [] {
        constexpr std::size_t n = 20000, dim = 64;
        std::mt19937_64 rng(7);
        std::normal_distribution<float> g;
        std::vector<EmbeddingRecord> recs(n);
        for (std::size_t i = 0; i < n; ++i) {
            recs[i].id = "v" + std::to_string(i);
            recs[i].vector.resize(dim);
            for (auto& v : recs[i].vector) v = g(rng);
        }
        return VectorStore(dim, recs);
    }();
    return s;
}

std::vector<std::vector<float>> queries(std::size_t count) {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> g;
    std::vector<std::vector<float>> qs(count, std::vector<float>(store().dim()));
    for (auto& q : qs)
        for (auto& v : q) v = g(rng);
    return qs;
}

const SyntheticData& synthetic() {
    static const SyntheticData d = make_synthetic({});
    return d;
}

std::vector<std::string> corpus_texts(std::size_t limit) {
    std::vector<std::string> out;
    for (const auto& d : synthetic().corpus.documents()) {
        if (out.size() == limit) break;
        out.push_back(d.text);
    }
    return out;
}

template <auto Scan>
void BM_ScanTopk(benchmark::State& state) {
    const auto q = queries(1).front();
    for (auto _ : state) benchmark::DoNotOptimize(Scan(store(), q, 100));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(store().size()));
}

template <auto Scan>
void BM_BatchScan(benchmark::State& state) {
    const auto qs = queries(64);
    for (auto _ : state) benchmark::DoNotOptimize(Scan(store(), qs, 50));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(qs.size()));
}

template <auto Embed>
void BM_EmbedBatch(benchmark::State& state) {
    static const BuiltinEncoder enc = make_encoder(synthetic().corpus, {}, 3);
    const auto texts = corpus_texts(2400);
    for (auto _ : state) benchmark::DoNotOptimize(Embed(enc, texts));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}

template <auto Bleu>
void BM_SelfBleu(benchmark::State& state) {
    const auto texts = corpus_texts(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Bleu(texts, 4));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}

}  // namespace

BENCHMARK(BM_ScanTopk<kernels::scan_topk_serial>)->Name("scan_topk/serial")->UseRealTime();
BENCHMARK(BM_ScanTopk<kernels::scan_topk_parallel>)->Name("scan_topk/parallel")->UseRealTime();
BENCHMARK(BM_BatchScan<kernels::batch_scan_topk_serial>)->Name("batch_scan_topk/serial")->UseRealTime();
BENCHMARK(BM_BatchScan<kernels::batch_scan_topk_parallel>)->Name("batch_scan_topk/parallel")->UseRealTime();
BENCHMARK(BM_EmbedBatch<kernels::embed_batch_serial>)->Name("embed_batch/serial")->UseRealTime();
BENCHMARK(BM_EmbedBatch<kernels::embed_batch_parallel>)->Name("embed_batch/parallel")->UseRealTime();
BENCHMARK(BM_SelfBleu<self_bleu_scores_serial>)->Name("self_bleu/serial")->Arg(200)->UseRealTime();
BENCHMARK(BM_SelfBleu<self_bleu_scores_parallel>)->Name("self_bleu/parallel")->Arg(200)->UseRealTime();

BENCHMARK_MAIN();
