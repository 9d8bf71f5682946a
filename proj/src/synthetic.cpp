#include "regen/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "regen/error.hpp"

namespace regen {

namespace {

constexpr const char* kClassNames[] = {"sports", "business", "science", "health", "politics", "travel", "music", "food"};
constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

std::string pseudo_word(std::mt19937_64& rng, std::size_t syllables) {
    std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
    std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnsets[onset(rng)];
        w += kVowels[vowel(rng)];
    }
    return w;
}

// Draws from a Zipf-like distribution over ranks.
class ZipfPicker {
public:
    explicit ZipfPicker(std::size_t n, double exponent = 0.8) {
        std::vector<double> w(n);
        for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
        dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }
    std::size_t operator()(std::mt19937_64& rng) { return dist_(rng); }

private:
    std::discrete_distribution<std::size_t> dist_;
};

}  // namespace

PipelineConfig synthetic_pipeline_config() {
    PipelineConfig cfg;
    cfg.seed = 1;
    cfg.contrastive = {2.0, 400, 5, 0};
    cfg.contrastive_pairs = 9600;
    cfg.classifier = {1.0, 32, 5, 0};
    return cfg;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ConfigError("synthetic corpus needs at least two classes");
    if (!(spec.distractor_min_share >= 0.0 && spec.distractor_min_share <= spec.distractor_max_share))
        throw ConfigError("synthetic distractor share range is invalid");
    if (spec.topic_vocab < 2 || spec.shared_vocab < 1) throw ConfigError("synthetic vocabularies too small");
    std::mt19937_64 rng(spec.seed);

    // Disjoint vocabularies: verbalizer first, then unique pseudo-words.
    std::set<std::string> used;
    SyntheticData data;
    data.topic_words.resize(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const std::string name = c < std::size(kClassNames) ? kClassNames[c] : "topic" + std::to_string(c + 1);
        used.insert(name);
        data.topic_words[c].push_back(name);
    }
    std::uniform_int_distribution<std::size_t> syllables(2, 3);
    const auto fresh_word = [&] {
        for (;;) {
            auto w = pseudo_word(rng, syllables(rng));
            if (used.insert(w).second) return w;
        }
    };
    for (std::size_t c = 0; c < spec.classes; ++c)
        while (data.topic_words[c].size() < spec.topic_vocab) data.topic_words[c].push_back(fresh_word());
    // The most frequent topic words double as the class verbalizers.
    const std::size_t n_verb = std::clamp<std::size_t>(spec.verbalizers_per_class, 1, spec.topic_vocab);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<std::string> verbs(data.topic_words[c].begin(), data.topic_words[c].begin() + n_verb);
        data.classes.push_back({static_cast<int>(c + 1), data.topic_words[c][0], std::move(verbs), "{VERB} News."});
    }
    std::vector<std::string> shared;
    while (shared.size() < spec.shared_vocab) shared.push_back(fresh_word());

    ZipfPicker topic_pick(spec.topic_vocab);
    ZipfPicker shared_pick(spec.shared_vocab, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> n_sentences(spec.min_sentences, spec.max_sentences);
    std::uniform_int_distribution<std::size_t> n_words(spec.min_sentence_words, spec.max_sentence_words);

    // Sentences of topic words mixed with background words; foreign
    // verbalizers (if any) are spliced in at random word positions.
    const auto make_text = [&](std::size_t topic, double topic_prob, const std::string* foreign, double share) {
        std::vector<std::vector<std::string>> sentences(n_sentences(rng));
        std::size_t total = 0;
        for (auto& s : sentences) {
            const std::size_t len = n_words(rng);
            for (std::size_t i = 0; i < len; ++i) {
                if (coin(rng) < topic_prob) {
                    s.push_back(data.topic_words[topic][topic_pick(rng)]);
                } else {
                    s.push_back(shared[shared_pick(rng)]);
                }
            }
            total += len;
        }
        if (foreign) {
            const auto uses = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(share * static_cast<double>(total))));
            for (std::size_t u = 0; u < uses; ++u) {
                auto& s = sentences[u % sentences.size()];
                std::uniform_int_distribution<std::size_t> at(0, s.size());
                s.insert(s.begin() + static_cast<std::ptrdiff_t>(at(rng)), *foreign);
            }
        }
        std::string text;
        for (const auto& s : sentences) {
            if (!text.empty()) text += ' ';
            for (std::size_t i = 0; i < s.size(); ++i) {
                std::string w = s[i];
                if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
                text += w;
                text += i + 1 == s.size() ? "." : " ";
            }
        }
        return text;
    };

    std::uniform_int_distribution<std::size_t> pick_class(0, spec.classes - 1);
    std::uniform_int_distribution<std::size_t> pick_other(1, spec.classes - 1);
    const std::size_t clean = spec.classes * spec.docs_per_class;
    const auto distractors = static_cast<std::size_t>(std::llround(spec.distractor_fraction * static_cast<double>(clean)));

    // One generated document: (text, true label).
    const auto draw = [&](bool distractor, std::size_t topic) {
        if (!distractor) return make_text(topic, spec.topic_word_prob, nullptr, 0.0);
        const std::size_t foreign = (topic + pick_other(rng)) % spec.classes;
        std::uniform_real_distribution<double> share(spec.distractor_min_share, spec.distractor_max_share);
        return make_text(topic, spec.distractor_topic_prob, &data.topic_words[foreign][0], share(rng));
    };

    std::vector<Document> docs;
    docs.reserve(clean + distractors);
    for (std::size_t i = 0; i < clean; ++i) {
        const std::size_t topic = i % spec.classes;
        const std::string id = "doc" + std::to_string(docs.size());
        docs.push_back({id, draw(false, topic), "synthetic"});
        data.truth[id] = static_cast<int>(topic + 1);
    }
    for (std::size_t i = 0; i < distractors; ++i) {
        const std::size_t topic = pick_class(rng);
        const std::string id = "doc" + std::to_string(docs.size());
        docs.push_back({id, draw(true, topic), "distractor"});
        data.truth[id] = static_cast<int>(topic + 1);
    }
    // Interleave so corpus order carries no label signal.
    std::shuffle(docs.begin(), docs.end(), rng);
    data.corpus = Corpus(std::move(docs));

    const double distractor_share = static_cast<double>(distractors) / static_cast<double>(clean + distractors);
    for (std::size_t i = 0; i < spec.held_out; ++i) {
        const std::size_t topic = i % spec.classes;
        const bool distractor = coin(rng) < distractor_share;
        data.held_out.push_back({draw(distractor, topic), static_cast<int>(topic + 1)});
    }
    return data;
}

}  // namespace regen
