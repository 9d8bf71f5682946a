#include "regen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include "regen/error.hpp"
#include "regen/kernels.hpp"
#include "regen/text.hpp"

namespace regen {

namespace {

void check_pair(std::span<const int> preds, std::span<const int> golds) {
    if (preds.size() != golds.size()) throw ConfigError("prediction and gold label counts differ");
    if (preds.empty()) throw ConfigError("no predictions to score");
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> golds) {
    check_pair(preds, golds);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const int> preds, std::span<const int> golds) {
    check_pair(preds, golds);
    std::set<int> labels(preds.begin(), preds.end());
    labels.insert(golds.begin(), golds.end());
    double total = 0.0;
    for (int c : labels) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == c && golds[i] == c) ++tp;
            else if (preds[i] == c) ++fp;
            else if (golds[i] == c) ++fn;
        }
        if (tp > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return total / static_cast<double>(labels.size());
}

WordCounts word_counts(std::span<const std::string> texts) {
    WordCounts counts;
    for (const auto& t : texts)
        for (auto& w : tokenize_words(t)) counts[std::move(w)] += 1.0;
    return counts;
}

double weighted_jaccard(const WordCounts& a, const WordCounts& b) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [word, ca] : a) {
        if (ca < 0.0) throw ConfigError("weighted_jaccard: negative count for '" + word + "'");
        auto it = b.find(word);
        const double cb = it == b.end() ? 0.0 : it->second;
        num += std::min(ca, cb);
        den += std::max(ca, cb);
    }
    for (const auto& [word, cb] : b) {
        if (cb < 0.0) throw ConfigError("weighted_jaccard: negative count for '" + word + "'");
        if (!a.count(word)) den += cb;
    }
    if (den == 0.0) throw ConfigError("weighted_jaccard: both distributions are empty");
    return num / den;
}

namespace {

// Reference statistics shared by every hypothesis: for each n-gram the two
// largest per-document counts (and the owner of the largest) so that the
// maximum over "all documents but me" is O(1).
struct NgramStats {
    struct Top2 {
        std::uint32_t best = 0;
        std::uint32_t second = 0;
        std::size_t owner = 0;
    };
    std::vector<std::vector<std::string>> tokens;
    std::vector<std::vector<std::unordered_map<std::string, std::uint32_t>>> counts;  // [doc][n-1]
    std::vector<std::unordered_map<std::string, Top2>> top;                          // [n-1]
    std::map<std::size_t, std::size_t> length_histogram;
};

std::string join_ngram(const std::vector<std::string>& toks, std::size_t start, std::size_t n) {
    std::string key = toks[start];
    for (std::size_t i = 1; i < n; ++i) {
        key.push_back('\x1f');
        key += toks[start + i];
    }
    return key;
}

NgramStats collect_stats(std::span<const std::string> texts, std::size_t max_n) {
    NgramStats s;
    s.tokens.reserve(texts.size());
    for (const auto& t : texts) s.tokens.push_back(tokenize_words(t));
    s.counts.resize(texts.size());
    s.top.resize(max_n);
    for (std::size_t d = 0; d < texts.size(); ++d) {
        const auto& toks = s.tokens[d];
        ++s.length_histogram[toks.size()];
        s.counts[d].resize(max_n);
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto& local = s.counts[d][n - 1];
            for (std::size_t i = 0; i + n <= toks.size(); ++i) ++local[join_ngram(toks, i, n)];
            for (const auto& [gram, c] : local) {
                auto& t = s.top[n - 1][gram];
                if (c > t.best) {
                    t.second = t.best;
                    t.best = c;
                    t.owner = d;
                } else if (c > t.second) {
                    t.second = c;
                }
            }
        }
    }
    return s;
}

std::size_t closest_reference_length(const NgramStats& s, std::size_t self_len) {
    // Lengths of all other documents: the histogram minus one copy of self.
    const auto available = [&](std::map<std::size_t, std::size_t>::const_iterator it) {
        return it->second - (it->first == self_len ? 1 : 0) > 0;
    };
    std::size_t best = 0;
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    for (auto it = s.length_histogram.begin(); it != s.length_histogram.end(); ++it) {
        if (!available(it)) continue;
        const std::size_t gap = it->first > self_len ? it->first - self_len : self_len - it->first;
        if (gap < best_gap) {
            best_gap = gap;
            best = it->first;
        }
    }
    return best;
}

double bleu_for(const NgramStats& s, std::size_t d, std::size_t max_n) {
    const auto& toks = s.tokens[d];
    const std::size_t len = toks.size();
    if (len == 0) return 0.0;
    const std::size_t orders = std::min(max_n, len);
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= orders; ++n) {
        std::uint64_t clipped = 0;
        for (const auto& [gram, c] : s.counts[d][n - 1]) {
            const auto& t = s.top[n - 1].at(gram);
            const std::uint32_t ref_max = t.owner == d ? t.second : t.best;
            clipped += std::min(c, ref_max);
        }
        if (clipped == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(len - n + 1));
    }
    const double ref_len = static_cast<double>(closest_reference_length(s, len));
    const double c = static_cast<double>(len);
    const double bp = c >= ref_len ? 1.0 : std::exp(1.0 - ref_len / c);
    return bp * std::exp(log_sum / static_cast<double>(orders));
}

void check_bleu_args(std::span<const std::string> texts, std::size_t max_n) {
    if (texts.size() < 2) throw ConfigError("self_bleu needs at least two texts");
    if (max_n == 0) throw ConfigError("self_bleu max_n must be positive");
}

}  // namespace

std::vector<double> self_bleu_scores_serial(std::span<const std::string> texts, std::size_t max_n) {
    check_bleu_args(texts, max_n);
    const auto stats = collect_stats(texts, max_n);
    std::vector<double> scores(texts.size());
    for (std::size_t d = 0; d < texts.size(); ++d) scores[d] = bleu_for(stats, d, max_n);
    return scores;
}

std::vector<double> self_bleu_scores_parallel(std::span<const std::string> texts, std::size_t max_n) {
    check_bleu_args(texts, max_n);
    const auto stats = collect_stats(texts, max_n);
    std::vector<double> scores(texts.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(texts.size()); ++d) {
        scores[d] = bleu_for(stats, static_cast<std::size_t>(d), max_n);
    }
    return scores;
}

double self_bleu(std::span<const std::string> texts, const SelfBleuOptions& options) {
    check_bleu_args(texts, options.max_n);
    std::vector<std::string> sample;
    std::span<const std::string> used = texts;
    if (options.max_documents >= 2 && texts.size() > options.max_documents) {
        std::vector<std::size_t> idx(texts.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(options.seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(options.max_documents);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) sample.push_back(texts[i]);
        used = sample;
    }
    const auto scores = self_bleu_scores_parallel(used, options.max_n);
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

double correctness_proxy(std::span<const LabeledExample> dataset, const ClassifierModel& proxy,
                         const Embedder& embedder) {
    if (dataset.empty()) throw ConfigError("correctness_proxy: empty dataset");
    if (proxy.classes() == 0) throw ConfigError("correctness_proxy: untrained proxy model");
    std::vector<std::string> texts;
    texts.reserve(dataset.size());
    for (const auto& e : dataset) texts.push_back(e.text);
    const auto vectors = kernels::embed_batch_parallel(embedder, texts);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) agree += proxy.predict(vectors[i].vector).label == dataset[i].label;
    return static_cast<double>(agree) / static_cast<double>(dataset.size());
}

}  // namespace regen
