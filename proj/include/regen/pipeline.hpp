#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regen/classifier.hpp"
#include "regen/corpus.hpp"
#include "regen/encoder.hpp"
#include "regen/index.hpp"
#include "regen/query.hpp"
#include "regen/task_config.hpp"

namespace regen {

struct RetrievedExample {
    std::string doc_id;
    std::string text;
    int label = 0;
    double score = 0.0;
    int round = 1;

    bool operator==(const RetrievedExample&) const = default;
};

inline constexpr std::string_view kSeparator = " [SEP] ";

// Template with the verbalizer substituted; round 1, no demonstration.
Query build_query(const ClassSpec& spec, std::string_view verbalizer);

// Templated verbalizer, separator, then the demonstration text cut to
// max_demo_tokens whitespace tokens.
Query augment_query(const ClassSpec& spec, std::string_view verbalizer, const RetrievedExample& demo, int round,
                    std::size_t max_demo_tokens = 128);

struct RetrievalStats {
    std::size_t hits = 0;        // before any dedup
    std::size_t collisions = 0;  // docs claimed by more than one class
};

// Union of each class's top-k hits, deduplicated by doc id (max score kept).
// A doc retrieved for several classes goes to the class with the higher
// score (smaller label on exact ties). Output is grouped by label, then
// score descending, then doc id.
std::vector<RetrievedExample> retrieve_round(const VectorIndex& index, const Embedder& embedder,
                                             const Corpus& corpus, std::span<const Query> queries, std::size_t k,
                                             std::size_t classes, int round, RetrievalStats* stats = nullptr);

// Examples whose label equals the classifier's argmax, original order.
std::vector<RetrievedExample> filter_self_consistency(std::span<const RetrievedExample> examples,
                                                      const ClassifierModel& classifier, const Embedder& embedder);

// Removes exact-text duplicates (the better-ranked copy survives) and keeps at
// most cap examples per class, preferring higher scores then smaller doc
// ids. Survivors keep their input order.
std::vector<RetrievedExample> cap_and_dedup(std::span<const RetrievedExample> examples, std::size_t cap);

// Mean round-1 query embedding per class turned into a linear classifier
// whose argmax is the nearest centroid.
ClassifierModel centroid_classifier(std::span<const Query> round1_queries, const Embedder& embedder,
                                    std::size_t classes, double alpha);

std::vector<LabeledExample> to_labeled(std::span<const RetrievedExample> examples);

struct RoundReport {
    int round = 0;
    std::size_t k = 0;
    std::size_t queries = 0;
    RetrievalStats retrieval;
    std::map<int, std::size_t> retrieved_per_class;
    std::map<int, std::size_t> kept_per_class;
    std::map<int, std::size_t> final_per_class;
    double keep_rate = 1.0;
    bool filtered = false;
    std::vector<double> train_losses;
};

struct RegenReport {
    std::vector<double> contrastive_losses;
    std::vector<RoundReport> rounds;
    std::size_t corpus_size = 0;
    std::size_t fallback_embeddings = 0;
    std::size_t truncated_documents = 0;  // cut at encoder.max_tokens
};

nlohmann::json to_json(const RegenReport& report);

struct RoundState {
    std::vector<Query> queries;
    std::vector<RetrievedExample> retrieved;  // T^t
    std::vector<RetrievedExample> filtered;   // T~^t after dedup and cap
    ClassifierModel classifier;               // C^t
};

struct RegenResult {
    std::vector<RetrievedExample> dataset;  // T~^T
    ClassifierModel classifier;             // C^T
    RegenReport report;
    std::optional<BuiltinEncoder> encoder;  // set when pretrained here
    std::vector<RoundState> rounds;
};

// Pretrains the built-in encoder on the corpus (contrastive pairs).
BuiltinEncoder pretrain_encoder(const Corpus& corpus, const PipelineConfig& config, RegenReport* report = nullptr);

struct EmbedStats {
    std::size_t fallbacks = 0;
    std::size_t truncated = 0;
};

// Embeds every document and builds the index.
VectorIndex build_corpus_index(const Corpus& corpus, const Embedder& embedder, IndexMode mode,
                               const IndexParams& params, EmbedStats* stats = nullptr);

// The full retrieve -> filter -> train loop. Pretrains the built-in encoder
// when embedder is null and builds the index when index is null. Errors are
// rethrown as StageError tagged with the failing stage.
RegenResult run_regen(const Corpus& corpus, const std::vector<ClassSpec>& classes, const PipelineConfig& config,
                      const Embedder* embedder = nullptr, const VectorIndex* index = nullptr);

// Dataset files: one JSON object per line {"doc_id","text","label","score","round"}.
void write_dataset(const std::filesystem::path& path, std::span<const RetrievedExample> dataset);
std::vector<RetrievedExample> read_dataset(const std::filesystem::path& path);

// Labeled files: one JSON object per line with at least "text" and "label".
std::vector<LabeledExample> read_labeled(const std::filesystem::path& path);

}  // namespace regen
