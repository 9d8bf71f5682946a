// regen: command-line front end for the retrieval-based dataset pipeline.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regen/classifier.hpp"
#include "regen/corpus.hpp"
#include "regen/embedding_io.hpp"
#include "regen/encoder.hpp"
#include "regen/error.hpp"
#include "regen/hashing.hpp"
#include "regen/index.hpp"
#include "regen/kernels.hpp"
#include "regen/metrics.hpp"
#include "regen/pipeline.hpp"
#include "regen/task_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace regen;

namespace {

struct Options {
    std::string config;
    std::vector<std::string> corpus;
    std::string embeddings;
    std::string encoder;
    std::string index;
    std::string dataset;
    std::string model;
    std::string data;
    std::string reference;
    std::string few_shot;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool exact = false;
    bool approx = false;
    bool no_round1_filter = false;
    bool no_filter = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

void emit_json(const Options& o, const json& j) {
    if (o.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(o.out, j);
    }
}

// Config with command-line overrides applied.
TaskConfig effective_config(const Options& o) {
    TaskConfig cfg = load_task_config(o.config);
    auto& p = cfg.pipeline;
    if (o.seed) p.seed = *o.seed;
    if (o.exact) p.index_mode = IndexMode::exact;
    if (o.approx) p.index_mode = IndexMode::approximate;
    if (o.no_round1_filter) p.round1_filter = false;
    if (o.no_filter) p.consistency_filter = false;
    return cfg;
}

Corpus read_corpus(const Options& o, const PipelineConfig& p) {
    std::vector<fs::path> paths(o.corpus.begin(), o.corpus.end());
    return load_corpus(paths, p.min_words);
}

// Either the precomputed vectors or a saved built-in encoder.
struct LoadedEmbedder {
    std::optional<BuiltinEncoder> builtin;
    std::optional<PrecomputedEmbedder> precomputed;
    const Embedder& get() const {
        if (precomputed) return *precomputed;
        return *builtin;
    }
};

LoadedEmbedder open_embedder(const Options& o, const Corpus* corpus) {
    LoadedEmbedder e;
    if (!o.embeddings.empty()) {
        if (!corpus) throw ConfigError("--embeddings needs --corpus to resolve document texts");
        e.precomputed.emplace(read_embeddings(o.embeddings), *corpus);
    } else if (!o.encoder.empty()) {
        e.builtin = load_encoder(o.encoder);
    } else {
        throw ConfigError("one of --encoder or --embeddings is required");
    }
    return e;
}

int cmd_pretrain(const Options& o) {
    const TaskConfig cfg = effective_config(o);
    const Corpus corpus = read_corpus(o, cfg.pipeline);
    RegenReport report;
    const BuiltinEncoder enc = pretrain_encoder(corpus, cfg.pipeline, &report);
    save_encoder(enc, o.out);
    std::cerr << "pretrain: " << report.contrastive_losses.size() << " epochs, final loss "
              << (report.contrastive_losses.empty() ? 0.0 : report.contrastive_losses.back()) << '\n';
    return 0;
}

void log_embed_stats(const EmbedStats& stats, const PipelineConfig& p) {
    if (stats.fallbacks) std::cerr << "index: " << stats.fallbacks << " documents embedded as zero vectors\n";
    if (stats.truncated)
        std::cerr << "index: " << stats.truncated << " documents truncated to " << p.encoder.max_tokens << " tokens\n";
}

int cmd_index(const Options& o) {
    const TaskConfig cfg = effective_config(o);
    const Corpus corpus = read_corpus(o, cfg.pipeline);
    const auto emb = open_embedder(o, &corpus);
    EmbedStats stats;
    const VectorIndex index =
        build_corpus_index(corpus, emb.get(), cfg.pipeline.index_mode, cfg.pipeline.index, &stats);
    index.save(o.out);
    log_embed_stats(stats, cfg.pipeline);
    return 0;
}

int cmd_curate(const Options& o) {
    const TaskConfig cfg = effective_config(o);
    const Corpus corpus = read_corpus(o, cfg.pipeline);
    const auto emb = open_embedder(o, &corpus);
    std::optional<VectorIndex> index;
    if (!o.index.empty()) index = VectorIndex::load(o.index);
    const RegenResult result =
        run_regen(corpus, cfg.classes, cfg.pipeline, &emb.get(), index ? &*index : nullptr);
    fs::create_directories(o.out);
    write_dataset(fs::path(o.out) / "dataset.jsonl", result.dataset);
    write_json(fs::path(o.out) / "report.json", to_json(result.report));
    return 0;
}

int cmd_train(const Options& o) {
    const TaskConfig cfg = effective_config(o);
    std::optional<Corpus> corpus;
    if (!o.corpus.empty()) corpus = read_corpus(o, cfg.pipeline);
    const auto emb = open_embedder(o, corpus ? &*corpus : nullptr);
    const auto dataset = read_dataset(o.dataset);
    const auto labeled = to_labeled(dataset);
    const auto& p = cfg.pipeline;
    TrainConfig tc = p.classifier;
    tc.seed = derive_seed(p.seed, "classifier train");
    const ClassifierOptions co{p.alpha, p.classifier_hidden};
    ClassifierModel model;
    if (!o.few_shot.empty()) {
        const auto few = read_labeled(o.few_shot);
        auto fused = few_shot_fuse(few, labeled, emb.get(), cfg.classes.size(), tc, co);
        std::cerr << "train: few-shot filter kept " << fused.kept.size() << " of " << labeled.size() << '\n';
        model = std::move(fused.model);
    } else {
        model = train_classifier(labeled, emb.get(), cfg.classes.size(), tc, co).model;
    }
    save_classifier(model, o.out);
    return 0;
}

int cmd_eval(const Options& o) {
    std::optional<Corpus> corpus;
    if (!o.corpus.empty()) corpus = load_corpus(std::vector<fs::path>(o.corpus.begin(), o.corpus.end()));
    const auto emb = open_embedder(o, corpus ? &*corpus : nullptr);
    const ClassifierModel model = load_classifier(o.model);
    const auto examples = read_labeled(o.data);
    std::vector<int> preds, golds;
    for (const auto& e : examples) {
        preds.push_back(predict(model, emb.get(), e.text).label);
        golds.push_back(e.label);
    }
    emit_json(o, {{"examples", examples.size()},
                  {"accuracy", accuracy(preds, golds)},
                  {"macro_f1", macro_f1(preds, golds)}});
    return 0;
}

int cmd_metrics(const Options& o) {
    const auto dataset = read_dataset(o.dataset);
    if (dataset.empty()) throw FormatError(o.dataset + ": dataset is empty");
    std::vector<std::string> texts;
    QualityReport report;
    for (const auto& e : dataset) {
        texts.push_back(e.text);
        ++report.per_class_sizes[e.label];
    }
    if (texts.size() >= 2) report.self_bleu = self_bleu(texts);
    if (!o.reference.empty()) {
        const Corpus ref = load_corpus({fs::path(o.reference)}, 0);
        std::vector<std::string> ref_texts;
        for (const auto& d : ref) ref_texts.push_back(d.text);
        report.weighted_jaccard = weighted_jaccard(word_counts(texts), word_counts(ref_texts));
    }
    if (!o.model.empty()) {
        std::optional<Corpus> corpus;
        if (!o.corpus.empty()) corpus = load_corpus(std::vector<fs::path>(o.corpus.begin(), o.corpus.end()));
        const auto emb = open_embedder(o, corpus ? &*corpus : nullptr);
        report.correctness_proxy = correctness_proxy(to_labeled(dataset), load_classifier(o.model), emb.get());
    }
    json sizes = json::object();
    for (const auto& [label, n] : report.per_class_sizes) sizes[std::to_string(label)] = n;
    json j = {{"self_bleu", report.self_bleu}, {"per_class_sizes", sizes}};
    j["weighted_jaccard"] = report.weighted_jaccard ? json(*report.weighted_jaccard) : json(nullptr);
    j["correctness_proxy"] = report.correctness_proxy ? json(*report.correctness_proxy) : json(nullptr);
    emit_json(o, j);
    return 0;
}

int cmd_pipeline(const Options& o) {
    const auto t_all = Clock::now();
    const TaskConfig cfg = effective_config(o);
    const auto& p = cfg.pipeline;
    const fs::path out(o.out);
    fs::create_directories(out);
    json timings = json::object();

    auto t = Clock::now();
    const Corpus corpus = read_corpus(o, p);
    timings["load_corpus"] = seconds_since(t);

    RegenReport pre_report;
    std::optional<BuiltinEncoder> builtin;
    std::optional<PrecomputedEmbedder> precomputed;
    t = Clock::now();
    if (!o.embeddings.empty()) {
        precomputed.emplace(read_embeddings(o.embeddings), corpus);
        timings["load_embeddings"] = seconds_since(t);
    } else {
        builtin = pretrain_encoder(corpus, p, &pre_report);
        timings["pretrain"] = seconds_since(t);
    }
    const Embedder& embedder = precomputed ? static_cast<const Embedder&>(*precomputed) : *builtin;

    t = Clock::now();
    EmbedStats stats;
    const VectorIndex index = build_corpus_index(corpus, embedder, p.index_mode, p.index, &stats);
    log_embed_stats(stats, p);
    timings["index"] = seconds_since(t);

    t = Clock::now();
    RegenResult result = run_regen(corpus, cfg.classes, p, &embedder, &index);
    timings["rounds"] = seconds_since(t);
    result.report.contrastive_losses = pre_report.contrastive_losses;
    result.report.fallback_embeddings = stats.fallbacks;
    result.report.truncated_documents = stats.truncated;

    json fuse = nullptr;
    if (!o.few_shot.empty()) {
        t = Clock::now();
        TrainConfig tc = p.classifier;
        tc.seed = derive_seed(p.seed, "classifier few-shot");
        auto fused = few_shot_fuse(read_labeled(o.few_shot), to_labeled(result.dataset), embedder,
                                   cfg.classes.size(), tc, {p.alpha, p.classifier_hidden});
        fuse = {{"kept", fused.kept.size()}, {"keep_rate", fused.keep_rate}};
        result.classifier = std::move(fused.model);
        timings["few_shot"] = seconds_since(t);
    }

    t = Clock::now();
    json artifacts = {{"dataset", (out / "dataset.jsonl").string()},
                      {"model", (out / "model.bin").string()},
                      {"report", (out / "report.json").string()},
                      {"manifest", (out / "manifest.json").string()}};
    write_dataset(out / "dataset.jsonl", result.dataset);
    save_classifier(result.classifier, out / "model.bin");
    json report = to_json(result.report);
    write_json(out / "report.json", report);
    if (builtin) {
        save_encoder(*builtin, out / "encoder.bin");
        artifacts["encoder"] = (out / "encoder.bin").string();
    }
    timings["write"] = seconds_since(t);
    timings["total"] = seconds_since(t_all);

    const json config_json = to_json(cfg);
    json manifest = {{"config", config_json},
                     {"config_hash", hex64(config_hash(config_json))},
                     {"seed", p.seed},
                     {"corpus", o.corpus},
                     {"embeddings", o.embeddings.empty() ? json(nullptr) : json(o.embeddings)},
                     {"stage_seconds", timings},
                     {"artifacts", artifacts},
                     {"rounds", report["rounds"]},
                     {"threads", kernels::max_threads()}};
    if (!fuse.is_null()) manifest["few_shot"] = fuse;
    write_json(out / "manifest.json", manifest);
    return 0;
}

void apply_thread_cap() {
    const char* env = std::getenv("REGEN_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) {
        std::cerr << "warning: ignoring REGEN_THREADS='" << env << "'\n";
        return;
    }
    kernels::set_max_threads(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-based synthetic training data curation"};
    app.require_subcommand(1);
    Options o;

    const auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Task config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the config seed");
    };
    const auto add_embedder = [&](CLI::App* sub) {
        sub->add_option("--encoder", o.encoder, "Saved built-in encoder")->check(CLI::ExistingFile);
        sub->add_option("--embeddings", o.embeddings, "Precomputed embedding file (RGEN)")->check(CLI::ExistingFile);
    };
    const auto add_corpus = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--corpus", o.corpus, "Corpus JSONL file(s)")->check(CLI::ExistingFile);
        if (required) opt->required();
    };
    const auto add_mode = [&](CLI::App* sub) {
        auto* ex = sub->add_flag("--exact", o.exact, "Exact top-k scan");
        auto* ap = sub->add_flag("--approx", o.approx, "HNSW approximate search");
        ex->excludes(ap);
    };
    const auto add_filters = [&](CLI::App* sub) {
        sub->add_flag("--no-round1-filter", o.no_round1_filter, "Skip the round-1 centroid filter");
        sub->add_flag("--no-filter", o.no_filter, "Skip self-consistency filtering in later rounds");
    };

    auto* pretrain = app.add_subcommand("pretrain", "Contrastive pretraining of the built-in encoder");
    add_config(pretrain);
    add_corpus(pretrain, true);
    pretrain->add_option("--out", o.out, "Encoder output file")->required();

    auto* index = app.add_subcommand("index", "Embed the corpus and build a search index");
    add_config(index);
    add_corpus(index, true);
    add_embedder(index);
    add_mode(index);
    index->add_option("--out", o.out, "Index output file")->required();

    auto* curate = app.add_subcommand("curate", "Multi-round retrieval and filtering");
    add_config(curate);
    add_corpus(curate, true);
    add_embedder(curate);
    add_mode(curate);
    add_filters(curate);
    curate->add_option("--index", o.index, "Prebuilt index")->check(CLI::ExistingFile);
    curate->add_option("--out", o.out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train the classifier on a curated dataset");
    add_config(train);
    add_corpus(train, false);
    add_embedder(train);
    train->add_option("--dataset", o.dataset, "Curated dataset (JSONL)")->required()->check(CLI::ExistingFile);
    train->add_option("--few-shot", o.few_shot, "Labeled few-shot examples (JSONL)")->check(CLI::ExistingFile);
    train->add_option("--out", o.out, "Model output file")->required();

    auto* eval = app.add_subcommand("eval", "Accuracy and macro-F1 of a model on labeled data");
    add_corpus(eval, false);
    add_embedder(eval);
    eval->add_option("--model", o.model, "Classifier model")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", o.data, "Labeled examples (JSONL)")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", o.out, "Write JSON here instead of stdout");

    auto* metrics = app.add_subcommand("metrics", "Dataset quality report");
    add_corpus(metrics, false);
    add_embedder(metrics);
    metrics->add_option("--dataset", o.dataset, "Curated dataset (JSONL)")->required()->check(CLI::ExistingFile);
    metrics->add_option("--reference", o.reference, "Reference corpus for weighted Jaccard")
        ->check(CLI::ExistingFile);
    metrics->add_option("--model", o.model, "Proxy classifier for the correctness score")
        ->check(CLI::ExistingFile);
    metrics->add_option("--out", o.out, "Write JSON here instead of stdout");

    auto* pipeline = app.add_subcommand("pipeline", "Pretrain, index, curate and train in one run");
    add_config(pipeline);
    add_corpus(pipeline, true);
    pipeline->add_option("--embeddings", o.embeddings, "Precomputed embeddings instead of the built-in encoder")
        ->check(CLI::ExistingFile);
    add_mode(pipeline);
    add_filters(pipeline);
    pipeline->add_option("--few-shot", o.few_shot, "Labeled few-shot examples (JSONL)")->check(CLI::ExistingFile);
    pipeline->add_option("--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    apply_thread_cap();
    try {
        if (*pretrain) return cmd_pretrain(o);
        if (*index) return cmd_index(o);
        if (*curate) return cmd_curate(o);
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*metrics) return cmd_metrics(o);
        if (*pipeline) return cmd_pipeline(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
