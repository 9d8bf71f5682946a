#pragma once

#include <cstddef>
#include <cstdint>

namespace regen {

// Plain-SGD schedule shared by the contrastive encoder and the classifier.
struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 400;
    std::size_t epochs = 5;
    std::uint64_t seed = 0;
};

// Contrastive pretraining defaults: lr 1e-4, batch 400, 5 epochs.
inline TrainConfig default_contrastive_config() { return {1e-4, 400, 5, 0}; }

// Linear-head defaults: lr 1e-2, batch 32, 5 epochs.
inline TrainConfig default_classifier_config() { return {1e-2, 32, 5, 0}; }

}  // namespace regen
