#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "regen/error.hpp"
#include "regen/index.hpp"
#include "regen/kernels.hpp"
#include "test_util.hpp"

using namespace regen;
using regen::testing::random_records;
using regen::testing::random_vector;

namespace {

// Independent oracle: score every record, sort by (score desc, id asc).
std::vector<ScoredHit> brute_force(const std::vector<EmbeddingRecord>& records, const std::vector<float>& q,
                                   std::size_t k) {
    std::vector<ScoredHit> all;
    for (const auto& r : records) {
        double s = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) s += static_cast<double>(q[d]) * static_cast<double>(r.vector[d]);
        all.push_back({r.id, s});
    }
    std::sort(all.begin(), all.end(), [](const ScoredHit& a, const ScoredHit& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

double recall(const std::vector<ScoredHit>& got, const std::vector<ScoredHit>& truth) {
    std::set<std::string> want;
    for (const auto& h : truth) want.insert(h.doc_id);
    std::size_t hit = 0;
    for (const auto& h : got) hit += want.count(h.doc_id);
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

TEST(Index, EmptyAndSingleton) {
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        const auto empty = VectorIndex::build({}, 3, mode);
        EXPECT_EQ(empty.size(), 0u);
        EXPECT_TRUE(empty.top_k(std::vector<float>{1, 2, 3}, 5).empty());

        const auto one = VectorIndex::build({{"only", {1.0f, 0.0f, 2.0f}}}, 3, mode);
        const auto hits = one.top_k(std::vector<float>{1.0f, 1.0f, 1.0f}, 4);
        ASSERT_EQ(hits.size(), 1u);
        EXPECT_EQ(hits[0].doc_id, "only");
        EXPECT_DOUBLE_EQ(hits[0].score, 3.0);
    }
}

TEST(Index, DominantVectorRanksFirst) {
    std::mt19937_64 rng(1);
    auto records = random_records(300, 8, rng);
    const auto q = random_vector(8, rng);
    EmbeddingRecord big{"winner", q};
    for (auto& v : big.vector) v *= 100.0f;
    records.push_back(big);
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        const auto index = VectorIndex::build(records, 8, mode);
        EXPECT_EQ(index.top_k(q, 1).at(0).doc_id, "winner");
    }
}

TEST(Index, KAtLeastSizeReturnsEverything) {
    std::mt19937_64 rng(2);
    const auto records = random_records(20, 4, rng);
    const auto q = random_vector(4, rng);
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        const auto index = VectorIndex::build(records, 4, mode);
        EXPECT_EQ(index.top_k(q, 20), brute_force(records, q, 20));
        EXPECT_EQ(index.top_k(q, 1000), brute_force(records, q, 20));
    }
}

TEST(Index, ExactMatchesBruteForce) {
    std::mt19937_64 rng(3);
    auto records = random_records(1000, 8, rng);
    // Duplicated vectors force score ties, which must break by id.
    for (int i = 0; i < 30; ++i) records.push_back({"z" + std::to_string(i), records[static_cast<std::size_t>(i)].vector});
    std::shuffle(records.begin(), records.end(), rng);
    const auto index = VectorIndex::build(records, 8, IndexMode::exact);
    for (int t = 0; t < 50; ++t) {
        const auto q = random_vector(8, rng);
        const std::size_t k = 1 + rng() % 60;
        EXPECT_EQ(index.top_k(q, k), brute_force(records, q, k)) << "query " << t;
    }
}

TEST(Index, TiesBreakByIdBytes) {
    const std::vector<EmbeddingRecord> records = {{"b", {1.0f}}, {"a", {1.0f}}, {"B", {1.0f}}, {"c", {0.5f}}};
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        const auto hits = VectorIndex::build(records, 1, mode).top_k(std::vector<float>{2.0f}, 4);
        ASSERT_EQ(hits.size(), 4u);
        EXPECT_EQ(hits[0].doc_id, "B");
        EXPECT_EQ(hits[1].doc_id, "a");
        EXPECT_EQ(hits[2].doc_id, "b");
        EXPECT_EQ(hits[3].doc_id, "c");
    }
}

TEST(Index, BatchEqualsSequential) {
    std::mt19937_64 rng(4);
    const auto records = random_records(500, 6, rng);
    std::vector<std::vector<float>> queries;
    for (int i = 0; i < 40; ++i) queries.push_back(random_vector(6, rng));
    queries.push_back(queries[3]);
    queries.push_back(queries[3]);
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        const auto index = VectorIndex::build(records, 6, mode);
        const auto batch = index.batch_top_k(queries, 7);
        ASSERT_EQ(batch.size(), queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) EXPECT_EQ(batch[i], index.top_k(queries[i], 7));
        EXPECT_EQ(batch[40], batch[3]);
    }
}

TEST(Index, ApproximateRecallAndExactScores) {
    std::mt19937_64 rng(5);
    const auto records = random_records(3000, 16, rng);
    const auto index = VectorIndex::build(records, 16, IndexMode::approximate);
    double total = 0.0;
    const int queries = 30;
    for (int t = 0; t < queries; ++t) {
        const auto q = random_vector(16, rng);
        const auto got = index.top_k(q, 50);
        const auto truth = brute_force(records, q, 50);
        total += recall(got, truth);
        // Scores are always exact dot products, in rank order.
        for (std::size_t i = 0; i < got.size(); ++i) {
            const auto pos = static_cast<std::size_t>(std::stoul(got[i].doc_id.substr(1)));
            EXPECT_EQ(got[i].score, dot(q, records[pos].vector));
            if (i) {
                EXPECT_GE(got[i - 1].score, got[i].score);
            }
        }
    }
    EXPECT_GE(total / queries, 0.95);
}

TEST(Index, ApproximateBuildIsDeterministic) {
    std::mt19937_64 rng(6);
    const auto records = random_records(800, 8, rng);
    regen::testing::TempDir dir("index");
    VectorIndex::build(records, 8, IndexMode::approximate).save(dir / "a.idx");
    VectorIndex::build(records, 8, IndexMode::approximate).save(dir / "b.idx");
    EXPECT_EQ(regen::testing::read_bytes(dir / "a.idx"), regen::testing::read_bytes(dir / "b.idx"));
}

TEST(Index, SaveLoadRoundTrip) {
    std::mt19937_64 rng(7);
    const auto records = random_records(400, 5, rng);
    regen::testing::TempDir dir("index");
    for (auto mode : {IndexMode::exact, IndexMode::approximate}) {
        IndexParams params;
        params.M = 8;
        params.ef_search = 40;
        const auto index = VectorIndex::build(records, 5, mode, params);
        index.save(dir / "i.idx");
        const auto back = VectorIndex::load(dir / "i.idx");
        EXPECT_EQ(back.mode(), mode);
        EXPECT_EQ(back.size(), 400u);
        EXPECT_EQ(back.params().M, 8u);
        EXPECT_EQ(back.params().ef_search, 40u);
        for (int t = 0; t < 10; ++t) {
            const auto q = random_vector(5, rng);
            EXPECT_EQ(back.top_k(q, 15), index.top_k(q, 15));
        }
        // The file starts with a plain embedding section.
        EXPECT_EQ(read_embeddings(dir / "i.idx").records, records);
    }
    regen::testing::write_text(dir / "junk.idx", "nope");
    EXPECT_THROW(VectorIndex::load(dir / "junk.idx"), FormatError);
}

TEST(Index, RejectsBadArguments) {
    const std::vector<EmbeddingRecord> records = {{"a", {1.0f, 2.0f}}};
    EXPECT_THROW(VectorIndex::build(records, 3), ConfigError);
    EXPECT_THROW(VectorIndex::build({{"a", {1.0f}}, {"a", {2.0f}}}, 1), ConfigError);
    EXPECT_THROW(VectorIndex::build({{"a", {std::nanf("")}}}, 1), ConfigError);
    const auto index = VectorIndex::build(records, 2);
    EXPECT_THROW(index.top_k(std::vector<float>{1.0f}, 1), ConfigError);
    EXPECT_THROW(index.top_k(std::vector<float>{1.0f, 1.0f}, 0), ConfigError);
}

TEST(Kernels, SerialEqualsParallel) {
    std::mt19937_64 rng(8);
    auto records = random_records(5000, 12, rng);
    for (int i = 0; i < 50; ++i) records.push_back({"dup" + std::to_string(i), records[static_cast<std::size_t>(i)].vector});
    const VectorStore store(12, records);
    std::vector<std::vector<float>> queries;
    for (int i = 0; i < 20; ++i) queries.push_back(random_vector(12, rng));
    queries.push_back(records[0].vector);
    const auto same = [](const std::vector<kernels::Candidate>& a, const std::vector<kernels::Candidate>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].index != b[i].index || a[i].score != b[i].score) return false;
        return true;
    };
    for (std::size_t k : {1u, 10u, 100u, 6000u}) {
        for (const auto& q : queries)
            EXPECT_TRUE(same(kernels::scan_topk_serial(store, q, k), kernels::scan_topk_parallel(store, q, k)));
        const auto a = kernels::batch_scan_topk_serial(store, queries, k);
        const auto b = kernels::batch_scan_topk_parallel(store, queries, k);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same(a[i], b[i]));
    }
}

TEST(Kernels, ThreadCap) {
    const int before = kernels::max_threads();
    kernels::set_max_threads(1);
    EXPECT_EQ(kernels::max_threads(), 1);
    kernels::set_max_threads(0);
    EXPECT_EQ(kernels::max_threads(), 1);
    kernels::set_max_threads(before);
}
