#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "regen/classifier.hpp"
#include "regen/encoder.hpp"

namespace regen {

// Fraction of positions where preds == golds. Throws ConfigError on length
// mismatch or empty input.
double accuracy(std::span<const int> preds, std::span<const int> golds);

// Unweighted mean of per-class F1 over every label seen in preds or golds;
// a class with no true positives contributes 0.
double macro_f1(std::span<const int> preds, std::span<const int> golds);

using WordCounts = std::unordered_map<std::string, double>;

// Lowercased word frequencies (same tokenization as the encoder).
WordCounts word_counts(std::span<const std::string> texts);

// sum_k min(a_k, b_k) / sum_k max(a_k, b_k) over the union vocabulary.
// Throws ConfigError on negative counts or when both totals are zero.
double weighted_jaccard(const WordCounts& a, const WordCounts& b);

struct SelfBleuOptions {
    std::size_t max_n = 4;
    // Larger datasets are subsampled (without replacement) to this many texts.
    std::size_t max_documents = 2000;
    std::uint64_t seed = 0;
};

// Per-text BLEU against every other text as a reference set. Clipped n-gram
// precision, geometric mean over orders 1..min(max_n, length), any zero
// precision gives 0, brevity penalty against the closest reference length
// (shorter wins ties).
std::vector<double> self_bleu_scores_serial(std::span<const std::string> texts, std::size_t max_n = 4);
std::vector<double> self_bleu_scores_parallel(std::span<const std::string> texts, std::size_t max_n = 4);

// Mean of self_bleu_scores over the (possibly subsampled) texts. Needs at
// least two texts.
double self_bleu(std::span<const std::string> texts, const SelfBleuOptions& options = {});

// Fraction of examples whose label matches the proxy model's prediction.
double correctness_proxy(std::span<const LabeledExample> dataset, const ClassifierModel& proxy,
                         const Embedder& embedder);

struct QualityReport {
    std::optional<double> correctness_proxy;
    double self_bleu = 0.0;
    std::optional<double> weighted_jaccard;
    std::map<int, std::size_t> per_class_sizes;
};

}  // namespace regen
