#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regen/classifier.hpp"
#include "regen/encoder.hpp"
#include "regen/index.hpp"
#include "regen/train_config.hpp"

namespace regen {

struct ClassSpec {
    int label = 0;  // 1..c
    std::string name;
    std::vector<std::string> verbalizers;
    std::string retrieval_template;  // contains "{VERB}" exactly once
};

inline constexpr std::string_view kVerbPlaceholder = "{VERB}";

struct PipelineConfig {
    std::size_t rounds = 3;
    std::vector<std::size_t> k_schedule = {50, 10, 10};
    std::size_t per_class_cap = 3000;
    double alpha = 0.1;
    double tau = 1.0;
    std::uint64_t seed = 0;

    // Demonstration-augmented queries per class in rounds >= 2.
    std::size_t queries_per_class = 10;
    std::size_t max_demo_tokens = 128;
    bool round1_filter = true;
    // Self-consistency filtering in rounds >= 2.
    bool consistency_filter = true;

    std::size_t min_words = 10;

    EncoderOptions encoder{};
    std::size_t vocab_cap = Vocabulary::kDefaultCap;
    // 0 means one pair per eligible document.
    std::size_t contrastive_pairs = 0;
    TrainConfig contrastive = default_contrastive_config();

    TrainConfig classifier = default_classifier_config();
    std::size_t classifier_hidden = 0;

    IndexMode index_mode = IndexMode::exact;
    IndexParams index{};
};

struct TaskConfig {
    std::vector<ClassSpec> classes;
    PipelineConfig pipeline;
};

// Throws ConfigError on schema violations: missing keys, wrong types, label
// set not exactly {1..c}, template without a single placeholder, k schedule
// length != rounds, non-positive k.
TaskConfig parse_task_config(const nlohmann::json& j);
TaskConfig load_task_config(const std::filesystem::path& path);
nlohmann::json to_json(const TaskConfig& config);

void validate(const std::vector<ClassSpec>& classes);
void validate(const PipelineConfig& config);

// FNV-1a of the canonical (key-sorted) JSON dump; stable under key reordering.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace regen
