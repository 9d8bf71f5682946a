#include "regen/task_config.hpp"

#include <fstream>
#include <set>

#include "regen/error.hpp"
#include "regen/hashing.hpp"

namespace regen {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": key \"" + key + "\" has the wrong type");
    }
}

std::size_t read_count(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError(where + ": key \"" + key + "\" must be a non-negative integer");
    return it->get<std::size_t>();
}

void read_train(const json& obj, TrainConfig& cfg, const std::string& where) {
    read_opt(obj, "learning_rate", cfg.learning_rate, where);
    cfg.batch_size = read_count(obj, "batch_size", cfg.batch_size, where);
    cfg.epochs = read_count(obj, "epochs", cfg.epochs, where);
}

}  // namespace

void validate(const std::vector<ClassSpec>& classes) {
    if (classes.empty()) throw ConfigError("task config: at least one class is required");
    std::set<int> labels;
    for (const auto& c : classes) {
        if (c.label < 1 || static_cast<std::size_t>(c.label) > classes.size())
            throw ConfigError("class '" + c.name + "': label " + std::to_string(c.label) + " outside 1.." +
                              std::to_string(classes.size()));
        if (!labels.insert(c.label).second) throw ConfigError("label " + std::to_string(c.label) + " used twice");
        if (c.verbalizers.empty()) throw ConfigError("class '" + c.name + "' has no verbalizers");
        for (const auto& v : c.verbalizers)
            if (v.empty()) throw ConfigError("class '" + c.name + "' has an empty verbalizer");
        const auto first = c.retrieval_template.find(kVerbPlaceholder);
        if (first == std::string::npos ||
            c.retrieval_template.find(kVerbPlaceholder, first + kVerbPlaceholder.size()) != std::string::npos)
            throw ConfigError("class '" + c.name + "': retrieval_template must contain {VERB} exactly once");
    }
}

void validate(const PipelineConfig& p) {
    if (p.rounds < 1) throw ConfigError("rounds must be at least 1");
    if (p.k_schedule.size() != p.rounds)
        throw ConfigError("k_schedule has " + std::to_string(p.k_schedule.size()) + " entries for " +
                          std::to_string(p.rounds) + " rounds");
    for (auto k : p.k_schedule)
        if (k == 0) throw ConfigError("k_schedule entries must be positive");
    if (p.per_class_cap < 1) throw ConfigError("per_class_cap must be at least 1");
    if (!(p.alpha >= 0.0 && p.alpha < 1.0)) throw ConfigError("alpha must be in [0, 1)");
    if (!(p.tau > 0.0)) throw ConfigError("tau must be positive");
    if (p.queries_per_class < 1) throw ConfigError("queries_per_class must be at least 1");
    if (p.encoder.dim < 1) throw ConfigError("encoder dim must be positive");
    if (p.contrastive.batch_size < 2) throw ConfigError("contrastive batch_size must be at least 2");
    if (p.classifier.batch_size < 1) throw ConfigError("classifier batch_size must be positive");
    if (!(p.contrastive.learning_rate >= 0.0) || !(p.classifier.learning_rate >= 0.0))
        throw ConfigError("learning rates must be non-negative");
}

TaskConfig parse_task_config(const json& j) {
    if (!j.is_object()) throw ConfigError("task config must be a JSON object");
    reject_unknown(j,
                   {"classes", "rounds", "k_schedule", "per_class_cap", "alpha", "tau", "seed", "queries_per_class",
                    "max_demo_tokens", "round1_filter", "consistency_filter", "min_words", "encoder", "classifier",
                    "index"},
                   "task config");
    TaskConfig cfg;
    auto classes = j.find("classes");
    if (classes == j.end() || !classes->is_array()) throw ConfigError("task config: \"classes\" array is required");
    for (const auto& c : *classes) {
        if (!c.is_object()) throw ConfigError("task config: class entries must be objects");
        reject_unknown(c, {"label", "name", "verbalizers", "retrieval_template"}, "class");
        ClassSpec spec;
        try {
            spec.label = c.at("label").get<int>();
            spec.name = c.value("name", "class" + std::to_string(spec.label));
            spec.verbalizers = c.at("verbalizers").get<std::vector<std::string>>();
            spec.retrieval_template = c.at("retrieval_template").get<std::string>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("task config: bad class entry (") + e.what() + ")");
        }
        cfg.classes.push_back(std::move(spec));
    }

    auto& p = cfg.pipeline;
    const std::string where = "task config";
    p.rounds = read_count(j, "rounds", p.rounds, where);
    if (auto ks = j.find("k_schedule"); ks != j.end()) {
        if (!ks->is_array()) throw ConfigError("task config: k_schedule must be an array");
        p.k_schedule.clear();
        for (const auto& k : *ks) {
            if (!k.is_number_integer() || k.get<long long>() <= 0)
                throw ConfigError("task config: k_schedule entries must be positive integers");
            p.k_schedule.push_back(k.get<std::size_t>());
        }
    } else if (p.k_schedule.size() != p.rounds) {
        p.k_schedule.resize(p.rounds, p.k_schedule.back());
    }
    p.per_class_cap = read_count(j, "per_class_cap", p.per_class_cap, where);
    read_opt(j, "alpha", p.alpha, where);
    read_opt(j, "tau", p.tau, where);
    read_opt(j, "seed", p.seed, where);
    p.queries_per_class = read_count(j, "queries_per_class", p.queries_per_class, where);
    p.max_demo_tokens = read_count(j, "max_demo_tokens", p.max_demo_tokens, where);
    read_opt(j, "round1_filter", p.round1_filter, where);
    read_opt(j, "consistency_filter", p.consistency_filter, where);
    p.min_words = read_count(j, "min_words", p.min_words, where);

    if (auto enc = j.find("encoder"); enc != j.end()) {
        reject_unknown(*enc,
                       {"dim", "normalize", "max_tokens", "vocab_cap", "pairs", "learning_rate", "batch_size", "epochs"},
                       "encoder");
        p.encoder.dim = read_count(*enc, "dim", p.encoder.dim, "encoder");
        read_opt(*enc, "normalize", p.encoder.normalize, "encoder");
        p.encoder.max_tokens = read_count(*enc, "max_tokens", p.encoder.max_tokens, "encoder");
        p.vocab_cap = read_count(*enc, "vocab_cap", p.vocab_cap, "encoder");
        p.contrastive_pairs = read_count(*enc, "pairs", p.contrastive_pairs, "encoder");
        read_train(*enc, p.contrastive, "encoder");
    }
    if (auto cls = j.find("classifier"); cls != j.end()) {
        reject_unknown(*cls, {"learning_rate", "batch_size", "epochs", "hidden"}, "classifier");
        read_train(*cls, p.classifier, "classifier");
        p.classifier_hidden = read_count(*cls, "hidden", p.classifier_hidden, "classifier");
    }
    if (auto idx = j.find("index"); idx != j.end()) {
        reject_unknown(*idx, {"mode", "M", "ef_construction", "ef_search"}, "index");
        std::string mode = to_string(p.index_mode);
        read_opt(*idx, "mode", mode, "index");
        if (mode == "exact") p.index_mode = IndexMode::exact;
        else if (mode == "approximate") p.index_mode = IndexMode::approximate;
        else throw ConfigError("index: mode must be \"exact\" or \"approximate\"");
        p.index.M = read_count(*idx, "M", p.index.M, "index");
        p.index.ef_construction = read_count(*idx, "ef_construction", p.index.ef_construction, "index");
        p.index.ef_search = read_count(*idx, "ef_search", p.index.ef_search, "index");
    }
    p.encoder.tau = p.tau;

    validate(cfg.classes);
    validate(p);
    return cfg;
}

TaskConfig load_task_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open task config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
    return parse_task_config(j);
}

json to_json(const TaskConfig& config) {
    const auto& p = config.pipeline;
    json classes = json::array();
    for (const auto& c : config.classes)
        classes.push_back({{"label", c.label},
                           {"name", c.name},
                           {"verbalizers", c.verbalizers},
                           {"retrieval_template", c.retrieval_template}});
    return {
        {"classes", classes},
        {"rounds", p.rounds},
        {"k_schedule", p.k_schedule},
        {"per_class_cap", p.per_class_cap},
        {"alpha", p.alpha},
        {"tau", p.tau},
        {"seed", p.seed},
        {"queries_per_class", p.queries_per_class},
        {"max_demo_tokens", p.max_demo_tokens},
        {"round1_filter", p.round1_filter},
        {"consistency_filter", p.consistency_filter},
        {"min_words", p.min_words},
        {"encoder",
         {{"dim", p.encoder.dim},
          {"normalize", p.encoder.normalize},
          {"max_tokens", p.encoder.max_tokens},
          {"vocab_cap", p.vocab_cap},
          {"pairs", p.contrastive_pairs},
          {"learning_rate", p.contrastive.learning_rate},
          {"batch_size", p.contrastive.batch_size},
          {"epochs", p.contrastive.epochs}}},
        {"classifier",
         {{"learning_rate", p.classifier.learning_rate},
          {"batch_size", p.classifier.batch_size},
          {"epochs", p.classifier.epochs},
          {"hidden", p.classifier_hidden}}},
        {"index",
         {{"mode", to_string(p.index_mode)},
          {"M", p.index.M},
          {"ef_construction", p.index.ef_construction},
          {"ef_search", p.index.ef_search}}},
    };
}

std::uint64_t config_hash(const json& j) { return fnv1a64(j.dump()); }

}  // namespace regen
