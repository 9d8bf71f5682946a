#include "regen/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "regen/error.hpp"
#include "regen/infonce.hpp"

namespace regen {

namespace {

constexpr char kEncoderMagic[4] = {'R', 'G', 'E', 'C'};
constexpr std::uint32_t kEncoderVersion = 1;

void check_shapes(const Vocabulary& vocab, const EncoderOptions& opts, const Matrix& table, const Matrix& projection) {
    if (opts.dim == 0) throw ConfigError("encoder dim must be positive");
    if (!(opts.tau > 0.0)) throw ConfigError("encoder temperature must be positive");
    if (opts.max_tokens == 0) throw ConfigError("encoder max_tokens must be positive");
    if (table.rows() != vocab.size() || table.cols() != opts.dim) throw ConfigError("embedding table shape mismatch");
    if (projection.rows() != opts.dim || projection.cols() != opts.dim) throw ConfigError("projection shape mismatch");
}

// Cached forward pass for one text.
struct Forward {
    std::vector<std::uint32_t> tokens;
    std::vector<double> mean;    // pooled table rows
    std::vector<double> hidden;  // P * mean
    std::vector<double> output;  // hidden, or hidden / |hidden|
    double norm = 0.0;
    bool truncated = false;
};

Forward forward(const BuiltinEncoder& enc, std::string_view text) {
    const auto& opts = enc.options();
    const std::size_t dim = opts.dim;
    Forward f;
    f.tokens = enc.vocabulary().encode(text, opts.max_tokens, &f.truncated);
    f.mean.assign(dim, 0.0);
    f.hidden.assign(dim, 0.0);
    f.output.assign(dim, 0.0);
    if (f.tokens.empty()) return f;

    const auto& table = enc.table();
    for (auto t : f.tokens) {
        const auto row = table.row(t);
        for (std::size_t d = 0; d < dim; ++d) f.mean[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(f.tokens.size());
    for (auto& v : f.mean) v *= inv;

    const auto& proj = enc.projection();
    for (std::size_t r = 0; r < dim; ++r) {
        const auto prow = proj.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < dim; ++c) acc += prow[c] * f.mean[c];
        f.hidden[r] = acc;
    }
    if (opts.normalize) {
        double sq = 0.0;
        for (double v : f.hidden) sq += v * v;
        f.norm = std::sqrt(sq);
        if (f.norm > 0.0)
            for (std::size_t d = 0; d < dim; ++d) f.output[d] = f.hidden[d] / f.norm;
    } else {
        f.output = f.hidden;
    }
    return f;
}

// Accumulates d(loss)/d(params) for one forward pass given d(loss)/d(output).
void backward(const BuiltinEncoder& enc, const Forward& f, std::span<const double> grad_out, EncoderGradient& grad) {
    if (f.tokens.empty()) return;
    const std::size_t dim = enc.options().dim;
    std::vector<double> grad_hidden(grad_out.begin(), grad_out.end());
    if (enc.options().normalize) {
        if (f.norm == 0.0) return;
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += f.output[d] * grad_out[d];
        for (std::size_t d = 0; d < dim; ++d) grad_hidden[d] = (grad_out[d] - f.output[d] * dot) / f.norm;
    }

    const auto& proj = enc.projection();
    std::vector<double> grad_mean(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        const double g = grad_hidden[r];
        if (g == 0.0) continue;
        auto grow = grad.projection.row(r);
        const auto prow = proj.row(r);
        for (std::size_t c = 0; c < dim; ++c) {
            grow[c] += g * f.mean[c];
            grad_mean[c] += g * prow[c];
        }
    }
    const double inv = 1.0 / static_cast<double>(f.tokens.size());
    for (auto t : f.tokens) {
        auto& row = grad.table_rows[t];
        if (row.empty()) row.assign(dim, 0.0);
        for (std::size_t d = 0; d < dim; ++d) row[d] += grad_mean[d] * inv;
    }
}

Matrix stack_outputs(const std::vector<Forward>& passes, std::size_t dim) {
    Matrix m(passes.size(), dim);
    for (std::size_t i = 0; i < passes.size(); ++i) std::copy(passes[i].output.begin(), passes[i].output.end(), m.row(i).begin());
    return m;
}

}  // namespace

BuiltinEncoder::BuiltinEncoder(Vocabulary vocabulary, EncoderOptions options, std::uint64_t seed)
    : vocabulary_(std::move(vocabulary)),
      options_(options),
      table_(vocabulary_.size(), options.dim),
      projection_(options.dim, options.dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, options.dim))));
    for (auto& v : table_.data()) v = normal(rng);
    for (std::size_t d = 0; d < options.dim; ++d) projection_(d, d) = 1.0;
    check_shapes(vocabulary_, options_, table_, projection_);
}

BuiltinEncoder::BuiltinEncoder(Vocabulary vocabulary, EncoderOptions options, Matrix table, Matrix projection)
    : vocabulary_(std::move(vocabulary)), options_(options), table_(std::move(table)), projection_(std::move(projection)) {
    check_shapes(vocabulary_, options_, table_, projection_);
}

std::vector<double> BuiltinEncoder::embed_f64(std::string_view text, bool* fallback) const {
    auto f = forward(*this, text);
    if (fallback) *fallback = f.tokens.empty();
    return std::move(f.output);
}

EmbedResult BuiltinEncoder::embed(std::string_view text) const {
    const auto f = forward(*this, text);
    EmbedResult result;
    result.fallback = f.tokens.empty();
    result.truncated = f.truncated;
    result.vector.assign(f.output.begin(), f.output.end());
    return result;
}

BuiltinEncoder make_encoder(const Corpus& corpus, EncoderOptions options, std::uint64_t seed, std::size_t vocab_cap) {
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& doc : corpus) texts.push_back(doc.text);
    return BuiltinEncoder(Vocabulary::build(texts, vocab_cap), options, seed);
}

double contrastive_batch_gradient(const BuiltinEncoder& encoder, std::span<const ContrastivePair> batch,
                                  EncoderGradient& grad) {
    const std::size_t dim = encoder.options().dim;
    grad.table_rows.clear();
    grad.projection = Matrix(dim, dim);

    std::vector<Forward> anchors;
    std::vector<Forward> positives;
    anchors.reserve(batch.size());
    positives.reserve(batch.size());
    for (const auto& pair : batch) {
        anchors.push_back(forward(encoder, pair.anchor_text));
        positives.push_back(forward(encoder, pair.positive_text));
    }
    const auto result = infonce_loss(stack_outputs(anchors, dim), stack_outputs(positives, dim), encoder.options().tau);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        backward(encoder, anchors[i], result.grad_anchors.row(i), grad);
        backward(encoder, positives[i], result.grad_positives.row(i), grad);
    }
    return result.loss;
}

double contrastive_batch_loss(const BuiltinEncoder& encoder, std::span<const ContrastivePair> batch) {
    const std::size_t dim = encoder.options().dim;
    Matrix anchors(batch.size(), dim);
    Matrix positives(batch.size(), dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto a = forward(encoder, batch[i].anchor_text).output;
        const auto p = forward(encoder, batch[i].positive_text).output;
        std::copy(a.begin(), a.end(), anchors.row(i).begin());
        std::copy(p.begin(), p.end(), positives.row(i).begin());
    }
    return infonce_loss(anchors, positives, encoder.options().tau).loss;
}

void apply_gradient(BuiltinEncoder& encoder, const EncoderGradient& grad, double learning_rate) {
    if (learning_rate == 0.0) return;
    auto& table = encoder.table();
    for (const auto& [token, g] : grad.table_rows) {
        auto row = table.row(token);
        for (std::size_t d = 0; d < row.size(); ++d) row[d] -= learning_rate * g[d];
    }
    auto& proj = encoder.projection().data();
    const auto& gp = grad.projection.data();
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] -= learning_rate * gp[i];
}

ContrastiveReport train_contrastive(BuiltinEncoder& encoder, std::span<const ContrastivePair> pairs,
                                    const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
        throw ConfigError("contrastive learning rate must be finite and non-negative");
    if (pairs.size() < 2) throw ConfigError("contrastive training needs at least 2 pairs");
    if (cfg.batch_size < 2) throw ConfigError("contrastive batch size must be at least 2");

    ContrastiveReport report;
    report.batch_size = std::min(cfg.batch_size, pairs.size());

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::vector<ContrastivePair> batch;
    EncoderGradient grad;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += report.batch_size) {
            const std::size_t end = std::min(order.size(), start + report.batch_size);
            if (end - start < 2) break;
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
            double loss = 0.0;
            try {
                loss = contrastive_batch_gradient(encoder, batch, grad);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw DivergenceError(std::string("contrastive training diverged: ") + e.what());
            }
            if (!std::isfinite(loss))
                throw DivergenceError("contrastive loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                      ", step " + std::to_string(report.steps + 1));
            apply_gradient(encoder, grad, cfg.learning_rate);
            loss_sum += loss;
            ++batches;
            ++report.steps;
        }
        report.epoch_losses.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    }
    return report;
}

void save_encoder(const BuiltinEncoder& encoder, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    const auto& opts = encoder.options();
    out.write(kEncoderMagic, 4);
    binio::put_u32(out, kEncoderVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(opts.dim));
    binio::put_u32(out, static_cast<std::uint32_t>(opts.max_tokens));
    binio::put_u32(out, opts.normalize ? 1u : 0u);
    binio::put_f64(out, opts.tau);
    const auto& entries = encoder.vocabulary().entries();
    binio::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) binio::put_string(out, e);
    for (double v : encoder.table().data()) binio::put_f64(out, v);
    for (double v : encoder.projection().data()) binio::put_f64(out, v);
    if (!out) throw Error("failed writing encoder " + path.string());
}

BuiltinEncoder load_encoder(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        binio::expect_magic(in, kEncoderMagic, "encoder file");
        if (const auto v = binio::get_u32(in); v != kEncoderVersion)
            throw FormatError("unsupported encoder version " + std::to_string(v));
        EncoderOptions opts;
        opts.dim = binio::get_u32(in);
        opts.max_tokens = binio::get_u32(in);
        opts.normalize = binio::get_u32(in) != 0;
        opts.tau = binio::get_f64(in);
        const auto vocab_size = binio::get_u32(in);
        std::vector<std::string> entries;
        entries.reserve(vocab_size);
        for (std::uint32_t i = 0; i < vocab_size; ++i) entries.push_back(binio::get_string(in));
        Matrix table(vocab_size, opts.dim);
        for (auto& v : table.data()) v = binio::get_f64(in);
        Matrix projection(opts.dim, opts.dim);
        for (auto& v : projection.data()) v = binio::get_f64(in);
        return BuiltinEncoder(Vocabulary(std::move(entries)), opts, std::move(table), std::move(projection));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

PrecomputedEmbedder::PrecomputedEmbedder(const EmbeddingFile& file, const Corpus& corpus) : dim_(file.dim) {
    if (dim_ == 0) throw ConfigError("precomputed embeddings have dim 0");
    for (const auto& r : file.records) by_id_.emplace(r.id, r.vector);
    for (const auto& doc : corpus) {
        if (!by_id_.count(doc.id)) throw ConfigError("no precomputed embedding for document '" + doc.id + "'");
        id_by_text_.emplace(doc.text, doc.id);
    }
}

const std::vector<float>* PrecomputedEmbedder::by_id(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &it->second;
}

EmbedResult PrecomputedEmbedder::embed(std::string_view text) const {
    EmbedResult result;
    if (auto it = id_by_text_.find(std::string(text)); it != id_by_text_.end()) {
        result.vector = by_id_.at(it->second);
        return result;
    }
    if (const auto* v = by_id(std::string(kQueryPrefix) + std::string(text))) {
        result.vector = *v;
        return result;
    }
    result.vector.assign(dim_, 0.0f);
    result.fallback = true;
    return result;
}

std::vector<float> PrecomputedEmbedder::embed_query(const Query& query) const {
    const std::string key = std::string(kQueryPrefix) + query.template_text;
    const auto* base = by_id(key);
    if (!base) throw ConfigError("precomputed embeddings lack query record '" + key + "'");
    if (!query.demo_doc_id) return *base;
    const auto* demo = by_id(*query.demo_doc_id);
    if (!demo) throw ConfigError("precomputed embeddings lack demonstration document '" + *query.demo_doc_id + "'");
    std::vector<float> out(dim_);
    for (std::size_t d = 0; d < dim_; ++d) out[d] = 0.5f * ((*base)[d] + (*demo)[d]);
    return out;
}

}  // namespace regen
