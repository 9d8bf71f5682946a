#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "regen/classifier.hpp"
#include "regen/corpus.hpp"
#include "regen/task_config.hpp"

namespace regen {

// Clustered toy corpus with known ground truth. Each class owns a disjoint
// topic vocabulary whose most frequent words are the class verbalizers;
// clean documents also draw from a shared background vocabulary.
// Distractors are pure-topic documents that repeat another class's first
// verbalizer, so that verbalizer's query retrieves them under the wrong label.
struct SyntheticSpec {
    std::size_t classes = 4;
    std::size_t docs_per_class = 500;
    double distractor_fraction = 0.2;  // relative to the clean document count
    std::size_t topic_vocab = 60;
    std::size_t shared_vocab = 80;
    double topic_word_prob = 0.5;
    double distractor_topic_prob = 1.0;
    // Foreign verbalizer mentions per distractor, as a fraction of its topic
    // and background words, drawn uniformly.
    double distractor_min_share = 0.35;
    double distractor_max_share = 0.45;
    std::size_t verbalizers_per_class = 5;
    std::size_t min_sentences = 3;
    std::size_t max_sentences = 6;
    std::size_t min_sentence_words = 5;
    std::size_t max_sentence_words = 10;
    std::size_t held_out = 800;
    std::uint64_t seed = 7;
};

struct SyntheticData {
    Corpus corpus;
    std::vector<ClassSpec> classes;
    std::unordered_map<std::string, int> truth;  // doc id -> true label
    std::vector<LabeledExample> held_out;        // same distribution, disjoint ids
    std::vector<std::vector<std::string>> topic_words;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

// Pipeline settings used with the synthetic corpus. The toy encoder starts
// from random rows, so it needs far larger steps than the defaults.
PipelineConfig synthetic_pipeline_config();

// Fraction of examples whose label agrees with truth.
template <typename Examples>
double label_precision(const Examples& examples, const std::unordered_map<std::string, int>& truth) {
    if (examples.empty()) return 0.0;
    std::size_t good = 0;
    for (const auto& e : examples) {
        auto it = truth.find(e.doc_id);
        good += it != truth.end() && it->second == e.label;
    }
    return static_cast<double>(good) / static_cast<double>(examples.size());
}

}  // namespace regen
