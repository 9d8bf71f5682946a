#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "regen/error.hpp"
#include "regen/metrics.hpp"
#include "regen/text.hpp"
#include "test_util.hpp"

using namespace regen;
using regen::testing::TableEmbedder;

namespace {

using Grams = std::map<std::vector<std::string>, int>;

Grams ngrams(const std::vector<std::string>& toks, std::size_t n) {
    Grams g;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) ++g[{toks.begin() + static_cast<std::ptrdiff_t>(i),
                                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n)}];
    return g;
}

// Straightforward BLEU of texts[h] against every other text.
double brute_bleu(const std::vector<std::string>& texts, std::size_t h, std::size_t max_n) {
    std::vector<std::vector<std::string>> toks;
    for (const auto& t : texts) toks.push_back(tokenize_words(t));
    const auto& hyp = toks[h];
    if (hyp.empty()) return 0.0;
    const std::size_t orders = std::min(max_n, hyp.size());
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= orders; ++n) {
        const auto mine = ngrams(hyp, n);
        int clipped = 0;
        for (const auto& [gram, count] : mine) {
            int ref_max = 0;
            for (std::size_t r = 0; r < toks.size(); ++r) {
                if (r == h) continue;
                const auto other = ngrams(toks[r], n);
                auto it = other.find(gram);
                if (it != other.end()) ref_max = std::max(ref_max, it->second);
            }
            clipped += std::min(count, ref_max);
        }
        if (clipped == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(hyp.size() - n + 1));
    }
    double ref_len = -1.0;
    for (std::size_t r = 0; r < toks.size(); ++r) {
        if (r == h) continue;
        const double len = static_cast<double>(toks[r].size());
        const double gap = std::abs(len - static_cast<double>(hyp.size()));
        const double best_gap = std::abs(ref_len - static_cast<double>(hyp.size()));
        if (ref_len < 0 || gap < best_gap || (gap == best_gap && len < ref_len)) ref_len = len;
    }
    const double c = static_cast<double>(hyp.size());
    const double bp = c >= ref_len ? 1.0 : std::exp(1.0 - ref_len / c);
    return bp * std::exp(log_sum / static_cast<double>(orders));
}

}  // namespace

TEST(Accuracy, Basics) {
    const std::vector<int> gold = {1, 2, 3, 1};
    EXPECT_EQ(accuracy(gold, gold), 1.0);
    EXPECT_EQ(macro_f1(gold, gold), 1.0);
    const std::vector<int> constant(4, 1);
    EXPECT_EQ(accuracy(constant, gold), 0.5);
    EXPECT_THROW(accuracy(std::vector<int>{1}, gold), ConfigError);
    EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), ConfigError);
}

TEST(MacroF1, FromConfusionMatrix) {
    // rows: gold, columns: predicted
    const int confusion[3][3] = {{5, 1, 0}, {0, 4, 2}, {1, 0, 7}};
    std::vector<int> preds, golds;
    for (int g = 0; g < 3; ++g)
        for (int p = 0; p < 3; ++p)
            for (int i = 0; i < confusion[g][p]; ++i) {
                golds.push_back(g + 1);
                preds.push_back(p + 1);
            }
    const double f1 = (10.0 / 12.0 + 8.0 / 11.0 + 14.0 / 17.0) / 3.0;
    EXPECT_NEAR(macro_f1(preds, golds), f1, 1e-12);
    EXPECT_NEAR(accuracy(preds, golds), 16.0 / 20.0, 1e-12);
}

TEST(MacroF1, ClassNeverPredictedScoresZero) {
    const std::vector<int> gold = {1, 1, 2, 2};
    const std::vector<int> pred = {1, 1, 1, 1};
    // class 1: 2tp 2fp -> 2/3; class 2: 0
    EXPECT_NEAR(macro_f1(pred, gold), (2.0 / 3.0) / 2.0, 1e-12);
}

TEST(WeightedJaccard, Values) {
    const WordCounts a = {{"a", 2}, {"b", 1}};
    const WordCounts b = {{"a", 1}, {"b", 3}};
    EXPECT_NEAR(weighted_jaccard(a, b), 0.4, 1e-12);
    EXPECT_EQ(weighted_jaccard(a, a), 1.0);
    EXPECT_EQ(weighted_jaccard(a, b), weighted_jaccard(b, a));
    EXPECT_EQ(weighted_jaccard({{"x", 1}}, {{"y", 4}}), 0.0);
    EXPECT_THROW(weighted_jaccard({}, {}), ConfigError);
    EXPECT_THROW(weighted_jaccard({{"x", -1}}, {{"x", 1}}), ConfigError);
}

TEST(WeightedJaccard, WordCountsTokenize) {
    const std::vector<std::string> texts = {"The cat. the DOG", "cat"};
    const auto counts = word_counts(texts);
    EXPECT_EQ(counts.at("the"), 2.0);
    EXPECT_EQ(counts.at("cat"), 2.0);
    EXPECT_EQ(counts.at("dog"), 1.0);
    EXPECT_EQ(counts.size(), 3u);
}

TEST(SelfBleu, IdenticalAndDisjoint) {
    const std::vector<std::string> same(5, "the quick brown fox jumps over");
    EXPECT_DOUBLE_EQ(self_bleu(same), 1.0);
    const std::vector<std::string> disjoint = {"alpha beta gamma delta", "one two three four", "red green blue cyan"};
    EXPECT_EQ(self_bleu(disjoint), 0.0);
    EXPECT_THROW(self_bleu(std::vector<std::string>{"only"}), ConfigError);
}

TEST(SelfBleu, MatchesBruteForce) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> texts;
        const std::size_t n = 2 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            std::string t;
            const std::size_t len = rng() % 9;
            for (std::size_t w = 0; w < len; ++w) t += vocab[rng() % vocab.size()] + " ";
            texts.push_back(t);
        }
        for (std::size_t max_n : {1u, 2u, 4u}) {
            const auto got = self_bleu_scores_serial(texts, max_n);
            const auto par = self_bleu_scores_parallel(texts, max_n);
            ASSERT_EQ(got.size(), n);
            for (std::size_t h = 0; h < n; ++h) {
                EXPECT_NEAR(got[h], brute_bleu(texts, h, max_n), 1e-12) << "trial " << trial << " doc " << h;
                EXPECT_EQ(got[h], par[h]);
            }
        }
    }
}

TEST(SelfBleu, PermutationInvariant) {
    std::vector<std::string> texts = {"a b c d", "a b c e", "x a b c", "b c d e f", "c d e"};
    const double before = self_bleu(texts);
    std::reverse(texts.begin(), texts.end());
    EXPECT_NEAR(self_bleu(texts), before, 1e-12);
}

TEST(SelfBleu, SubsamplesLargeSets) {
    std::vector<std::string> texts;
    for (int i = 0; i < 50; ++i) texts.push_back("w" + std::to_string(i % 7) + " common words here");
    SelfBleuOptions opts;
    opts.max_documents = 10;
    const double a = self_bleu(texts, opts);
    EXPECT_EQ(self_bleu(texts, opts), a);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
}

TEST(CorrectnessProxy, ConstantAndAccurateProxies) {
    TableEmbedder emb(3);
    std::vector<LabeledExample> balanced;
    for (int i = 0; i < 30; ++i) {
        const int label = i % 3 + 1;
        std::vector<float> v(3, 0.0f);
        v[static_cast<std::size_t>(label - 1)] = 1.0f + 0.01f * static_cast<float>(i);
        emb.add("t" + std::to_string(i), v);
        balanced.push_back({"t" + std::to_string(i), label});
    }
    // All-zero model predicts label 1 everywhere.
    EXPECT_NEAR(correctness_proxy(balanced, ClassifierModel(3, 3), emb), 1.0 / 3.0, 1e-12);

    // Perfect proxy on data with planted label noise recovers true precision.
    const auto proxy = nearest_centroid_classifier({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    std::mt19937_64 rng(4);
    std::vector<LabeledExample> noisy = balanced;
    std::size_t correct = 0;
    for (auto& e : noisy) {
        if (rng() % 4 == 0) e.label = e.label % 3 + 1;
        else ++correct;
    }
    const double truth = static_cast<double>(correct) / static_cast<double>(noisy.size());
    EXPECT_NEAR(correctness_proxy(noisy, proxy, emb), truth, 0.02);
    EXPECT_THROW(correctness_proxy({}, proxy, emb), ConfigError);
}
