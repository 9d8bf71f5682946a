#include "regen/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "regen/error.hpp"
#include "regen/kernels.hpp"

namespace regen {

namespace {

constexpr char kClassifierMagic[4] = {'R', 'G', 'C', 'L'};
constexpr std::uint32_t kClassifierVersion = 1;

}  // namespace

std::vector<double> smoothed_target(int label, std::size_t classes, double alpha) {
    if (classes == 0) throw ConfigError("smoothed_target: class count must be positive");
    if (label < 1 || static_cast<std::size_t>(label) > classes)
        throw ConfigError("smoothed_target: label " + std::to_string(label) + " outside 1.." + std::to_string(classes));
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("smoothed_target: alpha must be in [0, 1)");
    std::vector<double> q(classes, alpha / static_cast<double>(classes));
    q[label - 1] += 1.0 - alpha;
    return q;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double max = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - max);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

LossAndGradient label_smoothed_loss(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size() || logits.empty()) throw ConfigError("label_smoothed_loss: size mismatch");
    for (double z : logits)
        if (!std::isfinite(z)) throw Error("label_smoothed_loss: non-finite logit");
    const double max = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max);
    const double lse = max + std::log(sum);

    LossAndGradient out;
    out.gradient.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const double log_p = logits[j] - lse;
        out.loss -= target[j] * log_p;
        out.gradient[j] = std::exp(log_p) - target[j];
    }
    return out;
}

ClassifierModel::ClassifierModel(std::size_t classes, std::size_t dim, double alpha, std::size_t hidden,
                                 std::uint64_t seed)
    : classes_(classes), dim_(dim), hidden_(hidden), alpha_(alpha) {
    if (classes == 0 || dim == 0) throw ConfigError("classifier needs at least one class and a positive dimension");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("classifier alpha must be in [0, 1)");
    if (hidden > 0) {
        hidden_weights_.resize(hidden * dim);
        hidden_bias_.assign(hidden, 0.0f);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
        for (auto& w : hidden_weights_) w = static_cast<float>(normal(rng));
    }
    weights_.assign(classes * input_width(), 0.0f);
    bias_.assign(classes, 0.0f);
}

namespace {

std::vector<double> hidden_activations(const ClassifierModel& m, std::span<const float> x,
                                       const std::vector<float>& hw, const std::vector<float>& hb) {
    std::vector<double> a(m.hidden());
    for (std::size_t h = 0; h < m.hidden(); ++h) {
        double acc = hb[h];
        for (std::size_t d = 0; d < m.dim(); ++d) acc += static_cast<double>(hw[h * m.dim() + d]) * x[d];
        a[h] = std::tanh(acc);
    }
    return a;
}

}  // namespace

std::vector<double> ClassifierModel::logits(std::span<const float> x) const {
    if (x.size() != dim_) throw ConfigError("classifier input has dimension " + std::to_string(x.size()) +
                                            ", expected " + std::to_string(dim_));
    std::vector<double> input;
    if (hidden_ > 0) {
        input = hidden_activations(*this, x, hidden_weights_, hidden_bias_);
    } else {
        input.assign(x.begin(), x.end());
    }
    const std::size_t width = input_width();
    std::vector<double> z(classes_);
    for (std::size_t c = 0; c < classes_; ++c) {
        double acc = bias_[c];
        for (std::size_t d = 0; d < width; ++d) acc += static_cast<double>(weights_[c * width + d]) * input[d];
        z[c] = acc;
    }
    return z;
}

std::vector<double> ClassifierModel::predict_proba(std::span<const float> x) const {
    const auto z = logits(x);
    return softmax(z);
}

Prediction ClassifierModel::predict(std::span<const float> x) const {
    Prediction p;
    p.proba = predict_proba(x);
    const auto best = std::max_element(p.proba.begin(), p.proba.end());
    p.label = static_cast<int>(best - p.proba.begin()) + 1;
    return p;
}

std::size_t ClassifierModel::parameter_count() const noexcept {
    return hidden_weights_.size() + hidden_bias_.size() + weights_.size() + bias_.size();
}

std::vector<double> ClassifierModel::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto* part : {&hidden_weights_, &hidden_bias_, &weights_, &bias_}) out.insert(out.end(), part->begin(), part->end());
    return out;
}

double ClassifierModel::accumulate_gradient(std::span<const float> x, std::span<const double> target,
                                            std::vector<double>& grad) const {
    std::vector<double> input;
    if (hidden_ > 0) {
        input = hidden_activations(*this, x, hidden_weights_, hidden_bias_);
    } else {
        input.assign(x.begin(), x.end());
    }
    const auto z = logits(x);
    const auto lg = label_smoothed_loss(z, target);

    const std::size_t width = input_width();
    const std::size_t w_off = hidden_weights_.size() + hidden_bias_.size();
    const std::size_t b_off = w_off + weights_.size();
    std::vector<double> grad_input(hidden_ > 0 ? width : 0, 0.0);
    for (std::size_t c = 0; c < classes_; ++c) {
        const double g = lg.gradient[c];
        grad[b_off + c] += g;
        for (std::size_t d = 0; d < width; ++d) {
            grad[w_off + c * width + d] += g * input[d];
            if (hidden_ > 0) grad_input[d] += g * weights_[c * width + d];
        }
    }
    if (hidden_ > 0) {
        const std::size_t hb_off = hidden_weights_.size();
        for (std::size_t h = 0; h < hidden_; ++h) {
            const double g = grad_input[h] * (1.0 - input[h] * input[h]);
            grad[hb_off + h] += g;
            for (std::size_t d = 0; d < dim_; ++d) grad[h * dim_ + d] += g * x[d];
        }
    }
    return lg.loss;
}

void ClassifierModel::apply_update(std::span<const double> grad, double learning_rate) {
    std::size_t i = 0;
    for (auto* part : {&hidden_weights_, &hidden_bias_, &weights_, &bias_}) {
        for (auto& w : *part) w = static_cast<float>(static_cast<double>(w) - learning_rate * grad[i++]);
    }
}

ClassifierModel nearest_centroid_classifier(const std::vector<std::vector<float>>& centroids, double alpha) {
    if (centroids.empty()) throw ConfigError("nearest-centroid classifier needs at least one centroid");
    const std::size_t dim = centroids.front().size();
    ClassifierModel model(centroids.size(), dim, alpha);
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (centroids[c].size() != dim) throw ConfigError("centroid dimension mismatch");
        std::copy(centroids[c].begin(), centroids[c].end(), model.weights().begin() + static_cast<std::ptrdiff_t>(c * dim));
        model.bias()[c] = static_cast<float>(-0.5 * dot(centroids[c], centroids[c]));
    }
    return model;
}

TrainedClassifier train_classifier_on_vectors(const std::vector<std::vector<float>>& inputs,
                                              const std::vector<int>& labels, std::size_t classes,
                                              const TrainConfig& cfg, const ClassifierOptions& options,
                                              const ClassifierModel* start) {
    if (inputs.size() != labels.size()) throw ConfigError("train_classifier: inputs and labels differ in length");
    if (inputs.empty()) throw ConfigError("train_classifier: no training examples");
    if (cfg.batch_size == 0) throw ConfigError("train_classifier: batch size must be positive");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
        throw ConfigError("train_classifier: learning rate must be finite and non-negative");
    std::vector<std::size_t> per_class(classes, 0);
    for (int y : labels) {
        if (y < 1 || static_cast<std::size_t>(y) > classes)
            throw ConfigError("train_classifier: label " + std::to_string(y) + " out of range");
        ++per_class[y - 1];
    }
    for (std::size_t c = 0; c < classes && !start; ++c)
        if (per_class[c] == 0) throw ConfigError("train_classifier: class " + std::to_string(c + 1) + " has no examples");

    const std::size_t dim = inputs.front().size();
    TrainedClassifier out;
    out.model = start ? *start : ClassifierModel(classes, dim, options.alpha, options.hidden, cfg.seed);
    if (out.model.classes() != classes || out.model.dim() != dim)
        throw ConfigError("train_classifier: starting model does not match label set or dimension");

    std::vector<std::vector<double>> targets(classes + 1);
    for (std::size_t c = 1; c <= classes; ++c) targets[c] = smoothed_target(static_cast<int>(c), classes, out.model.alpha());

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x5eedc1a55ULL);
    std::vector<double> grad(out.model.parameter_count());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start_i = 0; start_i < order.size(); start_i += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start_i + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start_i; i < end; ++i) {
                const auto idx = order[i];
                if (inputs[idx].size() != dim) throw ConfigError("train_classifier: input dimension mismatch");
                try {
                    loss_sum += out.model.accumulate_gradient(inputs[idx], targets[labels[idx]], grad);
                } catch (const ConfigError&) {
                    throw;
                } catch (const Error& e) {
                    throw DivergenceError("classifier training diverged at epoch " + std::to_string(epoch + 1) +
                                          ": " + e.what());
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start_i);
            for (double& g : grad) g *= inv;
            out.model.apply_update(grad, cfg.learning_rate);
        }
        const double mean = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(mean))
            throw DivergenceError("classifier loss became non-finite at epoch " + std::to_string(epoch + 1));
        out.epoch_losses.push_back(mean);
    }
    // Least-squares slope of the per-epoch losses; a rising trend means the
    // step size is too large for the data.
    if (const std::size_t n = out.epoch_losses.size(); n >= 2) {
        const double x_mean = 0.5 * static_cast<double>(n - 1);
        double y_mean = 0.0;
        for (double l : out.epoch_losses) y_mean += l / static_cast<double>(n);
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = static_cast<double>(i) - x_mean;
            sxy += dx * (out.epoch_losses[i] - y_mean);
            sxx += dx * dx;
        }
        if (sxy / sxx > 1e-9 * std::max(1.0, y_mean))
            throw DivergenceError("classifier loss trended upward over training (first epoch " +
                                  std::to_string(out.epoch_losses.front()) + ", last " +
                                  std::to_string(out.epoch_losses.back()) + ")");
    }
    return out;
}

namespace {

std::vector<std::vector<float>> embed_texts(std::span<const LabeledExample> examples, const Embedder& embedder) {
    std::vector<std::string> texts;
    texts.reserve(examples.size());
    for (const auto& e : examples) texts.push_back(e.text);
    auto embedded = kernels::embed_batch_parallel(embedder, texts);
    std::vector<std::vector<float>> out;
    out.reserve(embedded.size());
    for (auto& e : embedded) out.push_back(std::move(e.vector));
    return out;
}

std::vector<int> labels_of(std::span<const LabeledExample> examples) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.label);
    return out;
}

}  // namespace

TrainedClassifier train_classifier(std::span<const LabeledExample> examples, const Embedder& embedder,
                                   std::size_t classes, const TrainConfig& cfg, const ClassifierOptions& options,
                                   const ClassifierModel* start) {
    return train_classifier_on_vectors(embed_texts(examples, embedder), labels_of(examples), classes, cfg, options,
                                       start);
}

Prediction predict(const ClassifierModel& model, const Embedder& embedder, std::string_view text) {
    return model.predict(embedder.embed(text).vector);
}

FuseResult few_shot_fuse(std::span<const LabeledExample> few_shot, std::span<const LabeledExample> synthetic,
                         const Embedder& embedder, std::size_t classes, const TrainConfig& cfg,
                         const ClassifierOptions& options) {
    FuseResult out;
    out.initial = train_classifier(few_shot, embedder, classes, cfg, options).model;
    out.model = out.initial;
    if (synthetic.empty()) return out;

    const auto vectors = embed_texts(synthetic, embedder);
    std::vector<std::vector<float>> kept_vectors;
    std::vector<int> kept_labels;
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        if (out.initial.predict(vectors[i]).label == synthetic[i].label) {
            out.kept.push_back(synthetic[i]);
            kept_vectors.push_back(vectors[i]);
            kept_labels.push_back(synthetic[i].label);
        }
    }
    out.keep_rate = static_cast<double>(out.kept.size()) / static_cast<double>(synthetic.size());
    if (out.kept.empty()) return out;
    out.model = train_classifier_on_vectors(kept_vectors, kept_labels, classes, cfg, options, &out.initial).model;
    return out;
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(kClassifierMagic, 4);
    binio::put_u32(out, kClassifierVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(model.classes()));
    binio::put_u32(out, static_cast<std::uint32_t>(model.dim()));
    binio::put_u32(out, static_cast<std::uint32_t>(model.hidden()));
    binio::put_f64(out, model.alpha());
    for (const auto* part : {&model.hidden_weights(), &model.hidden_bias(), &model.weights(), &model.bias()})
        for (float v : *part) binio::put_f32(out, v);
    if (!out) throw Error("failed writing classifier " + path.string());
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    try {
        binio::expect_magic(in, kClassifierMagic, "classifier file");
        if (const auto v = binio::get_u32(in); v != kClassifierVersion)
            throw FormatError("unsupported classifier version " + std::to_string(v));
        const auto classes = binio::get_u32(in);
        const auto dim = binio::get_u32(in);
        const auto hidden = binio::get_u32(in);
        const double alpha = binio::get_f64(in);
        ClassifierModel model(classes, dim, alpha, hidden);
        for (auto* part : {&model.hidden_weights(), &model.hidden_bias(), &model.weights(), &model.bias()})
            for (float& v : *part) v = binio::get_f32(in);
        return model;
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace regen
