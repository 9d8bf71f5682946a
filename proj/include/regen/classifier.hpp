#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "regen/encoder.hpp"
#include "regen/train_config.hpp"

namespace regen {

struct LabeledExample {
    std::string text;
    int label = 0;  // 1..c
};

// q_j = [j == y](1 - alpha) + alpha / c, labels 1-based.
std::vector<double> smoothed_target(int label, std::size_t classes, double alpha);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d logits
};

// Cross-entropy against a soft target: -sum_j q_j log softmax(z)_j, with
// gradient softmax(z) - q.
LossAndGradient label_smoothed_loss(std::span<const double> logits, std::span<const double> target);

std::vector<double> softmax(std::span<const double> logits);

struct Prediction {
    int label = 1;
    std::vector<double> proba;
};

// Softmax classifier over embeddings. Either linear (logits = W x + b) or
// with one tanh hidden layer (logits = W tanh(H x + h) + b). Parameters are
// stored as float so a saved model reloads bit-exactly.
class ClassifierModel {
public:
    ClassifierModel() = default;
    // Linear part zero-initialized; hidden weights (if any) drawn from seed.
    ClassifierModel(std::size_t classes, std::size_t dim, double alpha = 0.1, std::size_t hidden = 0,
                    std::uint64_t seed = 0);

    std::size_t classes() const noexcept { return classes_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t hidden() const noexcept { return hidden_; }
    double alpha() const noexcept { return alpha_; }

    std::vector<double> logits(std::span<const float> x) const;
    std::vector<double> predict_proba(std::span<const float> x) const;
    // Argmax with ties going to the smallest label.
    Prediction predict(std::span<const float> x) const;

    // Row-major classes x input, where input is hidden() or dim().
    std::vector<float>& weights() noexcept { return weights_; }
    std::vector<float>& bias() noexcept { return bias_; }
    const std::vector<float>& weights() const noexcept { return weights_; }
    const std::vector<float>& bias() const noexcept { return bias_; }
    std::vector<float>& hidden_weights() noexcept { return hidden_weights_; }
    std::vector<float>& hidden_bias() noexcept { return hidden_bias_; }
    const std::vector<float>& hidden_weights() const noexcept { return hidden_weights_; }
    const std::vector<float>& hidden_bias() const noexcept { return hidden_bias_; }

    // Loss and in-place gradient accumulation for one example. grad must
    // have the layout of parameters().
    double accumulate_gradient(std::span<const float> x, std::span<const double> target,
                               std::vector<double>& grad) const;
    std::size_t parameter_count() const noexcept;
    // Flat view order: hidden weights, hidden bias, weights, bias.
    std::vector<double> parameters() const;
    void apply_update(std::span<const double> grad, double learning_rate);

    bool operator==(const ClassifierModel&) const = default;

private:
    std::size_t input_width() const noexcept { return hidden_ > 0 ? hidden_ : dim_; }

    std::size_t classes_ = 0;
    std::size_t dim_ = 0;
    std::size_t hidden_ = 0;
    double alpha_ = 0.1;
    std::vector<float> hidden_weights_;
    std::vector<float> hidden_bias_;
    std::vector<float> weights_;
    std::vector<float> bias_;
};

ClassifierModel nearest_centroid_classifier(const std::vector<std::vector<float>>& centroids, double alpha = 0.1);

struct ClassifierOptions {
    double alpha = 0.1;
    std::size_t hidden = 0;
};

struct TrainedClassifier {
    ClassifierModel model;
    std::vector<double> epoch_losses;
};

// Mini-batch SGD on label-smoothed cross-entropy. Throws DivergenceError if a
// loss turns non-finite or the per-epoch losses trend upward (positive
// least-squares slope).
// Without `start`, every class 1..classes needs at least one example
// (ConfigError otherwise); with it, training continues from that model and
// missing classes are allowed.
TrainedClassifier train_classifier_on_vectors(const std::vector<std::vector<float>>& inputs,
                                              const std::vector<int>& labels, std::size_t classes,
                                              const TrainConfig& cfg, const ClassifierOptions& options,
                                              const ClassifierModel* start = nullptr);

TrainedClassifier train_classifier(std::span<const LabeledExample> examples, const Embedder& embedder,
                                   std::size_t classes, const TrainConfig& cfg, const ClassifierOptions& options,
                                   const ClassifierModel* start = nullptr);

Prediction predict(const ClassifierModel& model, const Embedder& embedder, std::string_view text);

struct FuseResult {
    ClassifierModel model;
    ClassifierModel initial;
    std::vector<LabeledExample> kept;
    double keep_rate = 1.0;
};

// Trains on the few-shot set, drops synthetic examples the few-shot model
// disagrees with, then continues training on what is left.
FuseResult few_shot_fuse(std::span<const LabeledExample> few_shot, std::span<const LabeledExample> synthetic,
                         const Embedder& embedder, std::size_t classes, const TrainConfig& cfg,
                         const ClassifierOptions& options);

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace regen
