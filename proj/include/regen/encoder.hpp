#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "regen/corpus.hpp"
#include "regen/embedding_io.hpp"
#include "regen/matrix.hpp"
#include "regen/query.hpp"
#include "regen/train_config.hpp"
#include "regen/vocabulary.hpp"

namespace regen {

struct EmbedResult {
    std::vector<float> vector;
    // No known token survived tokenization; vector is all zeros.
    bool fallback = false;
    // Input exceeded the encoder's token limit and was cut.
    bool truncated = false;
};

// Anything that maps texts (and retrieval queries) to fixed-size vectors.
// Implementations must be safe for concurrent const calls.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual EmbedResult embed(std::string_view text) const = 0;
    virtual std::vector<float> embed_query(const Query& query) const { return embed(query.text).vector; }
};

struct EncoderOptions {
    std::size_t dim = 64;
    double tau = 1.0;
    bool normalize = false;
    std::size_t max_tokens = 256;
};

// Token-embedding table + mean pooling + one linear projection:
//   embed(x) = P * mean_{t in x} E[t]      (optionally L2-normalized)
class BuiltinEncoder final : public Embedder {
public:
    // Table entries ~ N(0, 1/dim), projection = identity.
    BuiltinEncoder(Vocabulary vocabulary, EncoderOptions options, std::uint64_t seed);
    BuiltinEncoder(Vocabulary vocabulary, EncoderOptions options, Matrix table, Matrix projection);

    std::size_t dim() const override { return options_.dim; }
    EmbedResult embed(std::string_view text) const override;

    // Double-precision forward pass; all zeros when the text has no known tokens.
    std::vector<double> embed_f64(std::string_view text, bool* fallback = nullptr) const;

    const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
    const EncoderOptions& options() const noexcept { return options_; }
    const Matrix& table() const noexcept { return table_; }
    const Matrix& projection() const noexcept { return projection_; }
    Matrix& table() noexcept { return table_; }
    Matrix& projection() noexcept { return projection_; }

    bool operator==(const BuiltinEncoder& other) const {
        return vocabulary_.entries() == other.vocabulary_.entries() && table_ == other.table_ &&
               projection_ == other.projection_ && options_.dim == other.options_.dim &&
               options_.tau == other.options_.tau && options_.normalize == other.options_.normalize &&
               options_.max_tokens == other.options_.max_tokens;
    }

private:
    Vocabulary vocabulary_;
    EncoderOptions options_;
    Matrix table_;       // |V| x dim
    Matrix projection_;  // dim x dim
};

// Vocabulary + randomly initialized encoder for a corpus.
BuiltinEncoder make_encoder(const Corpus& corpus, EncoderOptions options, std::uint64_t seed,
                            std::size_t vocab_cap = Vocabulary::kDefaultCap);

// Sparse gradient of the contrastive loss w.r.t. encoder parameters.
struct EncoderGradient {
    std::map<std::uint32_t, std::vector<double>> table_rows;
    Matrix projection;
};

// Mean in-batch InfoNCE loss over one batch of pairs.
double contrastive_batch_loss(const BuiltinEncoder& encoder, std::span<const ContrastivePair> batch);

// Loss and gradient over one batch; grad is overwritten.
double contrastive_batch_gradient(const BuiltinEncoder& encoder, std::span<const ContrastivePair> batch,
                                  EncoderGradient& grad);

// params -= lr * grad
void apply_gradient(BuiltinEncoder& encoder, const EncoderGradient& grad, double learning_rate);

struct ContrastiveReport {
    std::vector<double> epoch_losses;
    std::size_t batch_size = 0;
    std::size_t steps = 0;
};

// SGD over shuffled batches of pairs. The batch size is clamped to the number
// of pairs; a trailing batch smaller than 2 is skipped. Throws
// DivergenceError when a batch loss turns non-finite.
ContrastiveReport train_contrastive(BuiltinEncoder& encoder, std::span<const ContrastivePair> pairs,
                                    const TrainConfig& cfg);

// Versioned binary encoder file ("RGEC"), parameters stored as f64.
void save_encoder(const BuiltinEncoder& encoder, const std::filesystem::path& path);
BuiltinEncoder load_encoder(const std::filesystem::path& path);

// Embedder backed by vectors computed elsewhere. Document texts resolve
// through the corpus to their record; query templates resolve to records
// with id "query:<text>"; augmented queries average the template vector and
// the demonstration document's vector. Unknown texts produce the flagged
// zero fallback.
class PrecomputedEmbedder final : public Embedder {
public:
    static constexpr std::string_view kQueryPrefix = "query:";

    PrecomputedEmbedder(const EmbeddingFile& file, const Corpus& corpus);

    std::size_t dim() const override { return dim_; }
    EmbedResult embed(std::string_view text) const override;
    std::vector<float> embed_query(const Query& query) const override;

    // Vector of a document id, or nullptr.
    const std::vector<float>* by_id(std::string_view id) const;

private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<float>> by_id_;
    std::unordered_map<std::string, std::string> id_by_text_;
};

}  // namespace regen
