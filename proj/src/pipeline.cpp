#include "regen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <unordered_map>

#include "regen/error.hpp"
#include "regen/hashing.hpp"
#include "regen/kernels.hpp"
#include "regen/text.hpp"

namespace regen {

using nlohmann::json;

namespace {

bool ranks_before(const RetrievedExample& a, const RetrievedExample& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

std::string fill_template(const ClassSpec& spec, std::string_view verbalizer) {
    const auto pos = spec.retrieval_template.find(kVerbPlaceholder);
    if (pos == std::string::npos)
        throw ConfigError("class '" + spec.name + "': retrieval_template has no {VERB} placeholder");
    std::string text = spec.retrieval_template;
    text.replace(pos, kVerbPlaceholder.size(), verbalizer);
    return text;
}

void require_verbalizer(const ClassSpec& spec, std::string_view verbalizer) {
    if (std::find(spec.verbalizers.begin(), spec.verbalizers.end(), verbalizer) == spec.verbalizers.end())
        throw ConfigError("'" + std::string(verbalizer) + "' is not a verbalizer of class '" + spec.name + "'");
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

std::map<int, std::size_t> count_per_class(std::span<const RetrievedExample> examples) {
    std::map<int, std::size_t> out;
    for (const auto& e : examples) ++out[e.label];
    return out;
}

}  // namespace

Query build_query(const ClassSpec& spec, std::string_view verbalizer) {
    require_verbalizer(spec, verbalizer);
    Query q;
    q.class_label = spec.label;
    q.text = fill_template(spec, verbalizer);
    q.template_text = q.text;
    q.round = 1;
    return q;
}

Query augment_query(const ClassSpec& spec, std::string_view verbalizer, const RetrievedExample& demo, int round,
                    std::size_t max_demo_tokens) {
    if (round < 2) throw ConfigError("augmented queries start at round 2");
    if (demo.label != spec.label)
        throw ConfigError("demonstration '" + demo.doc_id + "' has label " + std::to_string(demo.label) +
                          " but the query is for class " + std::to_string(spec.label));
    Query q = build_query(spec, verbalizer);
    q.text += kSeparator;
    q.text += truncate_tokens(demo.text, max_demo_tokens);
    q.round = round;
    q.demo_doc_id = demo.doc_id;
    return q;
}

std::vector<RetrievedExample> retrieve_round(const VectorIndex& index, const Embedder& embedder,
                                             const Corpus& corpus, std::span<const Query> queries, std::size_t k,
                                             std::size_t classes, int round, RetrievalStats* stats) {
    if (queries.empty()) throw ConfigError("retrieve_round: no queries");
    if (index.size() == 0) throw ConfigError("retrieve_round: index is empty");
    std::vector<bool> covered(classes + 1, false);
    for (const auto& q : queries) {
        if (q.class_label < 1 || static_cast<std::size_t>(q.class_label) > classes)
            throw ConfigError("retrieve_round: query for unknown class " + std::to_string(q.class_label));
        covered[q.class_label] = true;
    }
    for (std::size_t c = 1; c <= classes; ++c)
        if (!covered[c]) throw ConfigError("retrieve_round: class " + std::to_string(c) + " has no query");

    std::vector<std::vector<float>> vectors(queries.size());
    std::vector<std::exception_ptr> errors(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
        try {
            vectors[i] = embedder.embed_query(queries[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    const auto hits = index.batch_top_k(vectors, k);

    // Best score per (class, doc), then the winning class per doc.
    std::map<std::string, std::map<int, double>> per_doc;
    RetrievalStats local;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (const auto& h : hits[i]) {
            ++local.hits;
            auto& slot = per_doc[h.doc_id];
            auto [it, inserted] = slot.emplace(queries[i].class_label, h.score);
            if (!inserted) it->second = std::max(it->second, h.score);
        }
    }
    std::vector<RetrievedExample> out;
    out.reserve(per_doc.size());
    for (const auto& [doc_id, by_class] : per_doc) {
        if (by_class.size() > 1) ++local.collisions;
        auto best = by_class.begin();
        for (auto it = by_class.begin(); it != by_class.end(); ++it)
            if (it->second > best->second) best = it;
        const auto pos = corpus.find(doc_id);
        if (!pos) throw ConfigError("retrieve_round: index document '" + doc_id + "' is not in the corpus");
        out.push_back({doc_id, corpus[*pos].text, best->first, best->second, round});
    }
    std::sort(out.begin(), out.end(), [](const RetrievedExample& a, const RetrievedExample& b) {
        if (a.label != b.label) return a.label < b.label;
        return ranks_before(a, b);
    });
    if (stats) *stats = local;
    return out;
}

std::vector<RetrievedExample> filter_self_consistency(std::span<const RetrievedExample> examples,
                                                      const ClassifierModel& classifier, const Embedder& embedder) {
    if (classifier.dim() != embedder.dim())
        throw ConfigError("filter: classifier dimension does not match the embedder");
    for (const auto& e : examples)
        if (e.label < 1 || static_cast<std::size_t>(e.label) > classifier.classes())
            throw ConfigError("filter: example label " + std::to_string(e.label) + " outside the classifier's 1.." +
                              std::to_string(classifier.classes()));
    std::vector<std::string> texts;
    texts.reserve(examples.size());
    for (const auto& e : examples) texts.push_back(e.text);
    const auto vectors = kernels::embed_batch_parallel(embedder, texts);
    std::vector<RetrievedExample> kept;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (classifier.predict(vectors[i].vector).label == examples[i].label) kept.push_back(examples[i]);
    return kept;
}

std::vector<RetrievedExample> cap_and_dedup(std::span<const RetrievedExample> examples, std::size_t cap) {
    if (cap < 1) throw ConfigError("cap_and_dedup: cap must be at least 1");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ranks_before(examples[a], examples[b]); });

    std::vector<bool> keep(examples.size(), false);
    std::unordered_map<std::string_view, bool> seen_text;
    std::map<int, std::size_t> taken;
    for (std::size_t i : order) {
        const auto& e = examples[i];
        if (!seen_text.emplace(e.text, true).second) continue;
        if (taken[e.label] >= cap) continue;
        ++taken[e.label];
        keep[i] = true;
    }
    std::vector<RetrievedExample> out;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (keep[i]) out.push_back(examples[i]);
    return out;
}

ClassifierModel centroid_classifier(std::span<const Query> round1_queries, const Embedder& embedder,
                                    std::size_t classes, double alpha) {
    const std::size_t dim = embedder.dim();
    std::vector<std::vector<double>> sums(classes, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (const auto& q : round1_queries) {
        if (q.class_label < 1 || static_cast<std::size_t>(q.class_label) > classes)
            throw ConfigError("centroid classifier: query for unknown class");
        const auto v = embedder.embed_query(q);
        for (std::size_t d = 0; d < dim; ++d) sums[q.class_label - 1][d] += v[d];
        ++counts[q.class_label - 1];
    }
    std::vector<std::vector<float>> centroids(classes, std::vector<float>(dim, 0.0f));
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) throw ConfigError("centroid classifier: class " + std::to_string(c + 1) + " has no query");
        for (std::size_t d = 0; d < dim; ++d)
            centroids[c][d] = static_cast<float>(sums[c][d] / static_cast<double>(counts[c]));
    }
    return nearest_centroid_classifier(centroids, alpha);
}

std::vector<LabeledExample> to_labeled(std::span<const RetrievedExample> examples) {
    std::vector<LabeledExample> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back({e.text, e.label});
    return out;
}

json to_json(const RegenReport& report) {
    const auto class_map = [](const std::map<int, std::size_t>& m) {
        json j = json::object();
        for (const auto& [label, n] : m) j[std::to_string(label)] = n;
        return j;
    };
    json rounds = json::array();
    for (const auto& r : report.rounds) {
        rounds.push_back({{"round", r.round},
                          {"k", r.k},
                          {"queries", r.queries},
                          {"hits", r.retrieval.hits},
                          {"collisions", r.retrieval.collisions},
                          {"retrieved_per_class", class_map(r.retrieved_per_class)},
                          {"kept_per_class", class_map(r.kept_per_class)},
                          {"final_per_class", class_map(r.final_per_class)},
                          {"filtered", r.filtered},
                          {"keep_rate", r.keep_rate},
                          {"train_losses", r.train_losses}});
    }
    return {{"corpus_size", report.corpus_size},
            {"fallback_embeddings", report.fallback_embeddings},
            {"truncated_documents", report.truncated_documents},
            {"contrastive_losses", report.contrastive_losses},
            {"rounds", rounds}};
}

BuiltinEncoder pretrain_encoder(const Corpus& corpus, const PipelineConfig& config, RegenReport* report) {
    EncoderOptions opts = config.encoder;
    opts.tau = config.tau;
    BuiltinEncoder encoder = make_encoder(corpus, opts, derive_seed(config.seed, "encoder-init"), config.vocab_cap);
    if (config.contrastive.epochs == 0) return encoder;
    std::size_t n = config.contrastive_pairs;
    if (n == 0) {
        for (const auto& doc : corpus) n += split_sentences(doc.text).size() >= 2;
    }
    if (n < 2) throw ConfigError("corpus has too few multi-sentence documents for contrastive pretraining");
    const auto pairs = sample_pairs(corpus, n, derive_seed(config.seed, "pairs"));
    TrainConfig cfg = config.contrastive;
    cfg.seed = derive_seed(config.seed, "contrastive");
    const auto result = train_contrastive(encoder, pairs, cfg);
    if (report) report->contrastive_losses = result.epoch_losses;
    return encoder;
}

VectorIndex build_corpus_index(const Corpus& corpus, const Embedder& embedder, IndexMode mode,
                               const IndexParams& params, EmbedStats* stats) {
    std::vector<EmbeddingRecord> records(corpus.size());
    std::vector<char> fell_back(corpus.size(), 0);
    std::vector<char> truncated(corpus.size(), 0);
    const auto* precomputed = dynamic_cast<const PrecomputedEmbedder*>(&embedder);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(corpus.size()); ++i) {
        const auto& doc = corpus[i];
        records[i].id = doc.id;
        if (precomputed) {
            records[i].vector = *precomputed->by_id(doc.id);
        } else {
            auto e = embedder.embed(doc.text);
            fell_back[i] = e.fallback;
            truncated[i] = e.truncated;
            records[i].vector = std::move(e.vector);
        }
    }
    if (stats) {
        stats->fallbacks = static_cast<std::size_t>(std::count(fell_back.begin(), fell_back.end(), 1));
        stats->truncated = static_cast<std::size_t>(std::count(truncated.begin(), truncated.end(), 1));
    }
    return VectorIndex::build(records, embedder.dim(), mode, params);
}

RegenResult run_regen(const Corpus& corpus, const std::vector<ClassSpec>& classes, const PipelineConfig& config,
                      const Embedder* embedder, const VectorIndex* index) {
    in_stage("config", [&] {
        validate(classes);
        validate(config);
        if (corpus.empty()) throw ConfigError("corpus is empty");
    });
    const std::size_t c = classes.size();
    std::vector<const ClassSpec*> by_label(c + 1, nullptr);
    for (const auto& spec : classes) by_label[spec.label] = &spec;

    RegenResult result;
    result.report.corpus_size = corpus.size();

    if (!embedder) {
        result.encoder = in_stage("pretrain", [&] { return pretrain_encoder(corpus, config, &result.report); });
        embedder = &*result.encoder;
    }
    std::optional<VectorIndex> owned_index;
    if (!index) {
        owned_index = in_stage("index", [&] {
            IndexParams params = config.index;
            params.seed = derive_seed(config.seed, "index");
            EmbedStats stats;
            auto built = build_corpus_index(corpus, *embedder, config.index_mode, params, &stats);
            result.report.fallback_embeddings = stats.fallbacks;
            result.report.truncated_documents = stats.truncated;
            return built;
        });
        index = &*owned_index;
    }
    if (index->dim() != embedder->dim()) throw StageError("index", "index dimension does not match the embedder");

    ClassifierModel previous;
    for (std::size_t t = 1; t <= config.rounds; ++t) {
        const int round = static_cast<int>(t);
        const std::string tag = " round " + std::to_string(t);
        RoundState state;
        RoundReport rr;
        rr.round = round;
        rr.k = config.k_schedule[t - 1];

        state.queries = in_stage("queries" + tag, [&] {
            std::vector<Query> queries;
            for (std::size_t label = 1; label <= c; ++label) {
                const auto& spec = *by_label[label];
                if (t == 1) {
                    for (const auto& v : spec.verbalizers) queries.push_back(build_query(spec, v));
                    continue;
                }
                // Demonstrations: best-scored examples of this class in T~^{t-1}.
                std::vector<RetrievedExample> demos;
                for (const auto& e : result.rounds.back().filtered)
                    if (e.label == spec.label) demos.push_back(e);
                std::stable_sort(demos.begin(), demos.end(), ranks_before);
                if (demos.size() > config.queries_per_class) demos.resize(config.queries_per_class);
                for (std::size_t j = 0; j < demos.size(); ++j) {
                    const auto& verbalizer = spec.verbalizers[j % spec.verbalizers.size()];
                    queries.push_back(augment_query(spec, verbalizer, demos[j], round, config.max_demo_tokens));
                }
            }
            return queries;
        });
        rr.queries = state.queries.size();

        state.retrieved = in_stage("retrieve" + tag, [&] {
            return retrieve_round(*index, *embedder, corpus, state.queries, rr.k, c, round, &rr.retrieval);
        });
        rr.retrieved_per_class = count_per_class(state.retrieved);

        auto kept = in_stage("filter" + tag, [&] {
            if (t == 1 && config.round1_filter) {
                rr.filtered = true;
                const auto prior = centroid_classifier(state.queries, *embedder, c, config.alpha);
                return filter_self_consistency(state.retrieved, prior, *embedder);
            }
            if (t > 1 && config.consistency_filter) {
                rr.filtered = true;
                return filter_self_consistency(state.retrieved, previous, *embedder);
            }
            return state.retrieved;
        });
        rr.kept_per_class = count_per_class(kept);
        rr.keep_rate = state.retrieved.empty()
                           ? 1.0
                           : static_cast<double>(kept.size()) / static_cast<double>(state.retrieved.size());

        state.filtered = cap_and_dedup(kept, config.per_class_cap);
        rr.final_per_class = count_per_class(state.filtered);
        for (std::size_t label = 1; label <= c; ++label) {
            if (!rr.final_per_class.count(static_cast<int>(label)))
                throw StageError("filter" + tag, "class " + std::to_string(label) + " ('" + by_label[label]->name +
                                                     "') has no examples left after filtering");
        }

        auto trained = in_stage("train" + tag, [&] {
            TrainConfig cfg = config.classifier;
            cfg.seed = derive_seed(config.seed, "classifier" + tag);
            const auto labeled = to_labeled(state.filtered);
            return train_classifier(labeled, *embedder, c, cfg, {config.alpha, config.classifier_hidden});
        });
        rr.train_losses = trained.epoch_losses;
        previous = trained.model;
        state.classifier = std::move(trained.model);

        result.report.rounds.push_back(std::move(rr));
        result.rounds.push_back(std::move(state));
    }
    result.dataset = result.rounds.back().filtered;
    result.classifier = result.rounds.back().classifier;
    return result;
}

void write_dataset(const std::filesystem::path& path, std::span<const RetrievedExample> dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (const auto& e : dataset) {
        const json record = {{"doc_id", e.doc_id}, {"text", e.text}, {"label", e.label}, {"score", e.score}, {"round", e.round}};
        out << record.dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<RetrievedExample> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<RetrievedExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("doc_id").get<std::string>(), j.at("text").get<std::string>(), j.at("label").get<int>(),
                           j.at("score").get<double>(), j.at("round").get<int>()});
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<LabeledExample> read_labeled(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<LabeledExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("text").get<std::string>(), j.at("label").get<int>()});
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace regen
