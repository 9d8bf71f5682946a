#include "regen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "regen/error.hpp"
#include "regen/text.hpp"

namespace regen {

using nlohmann::json;

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        const auto& doc = documents_[i];
        if (doc.id.empty()) throw ConfigError("document at position " + std::to_string(i) + " has an empty id");
        if (!by_id_.emplace(doc.id, i).second) throw ConfigError("duplicate document id '" + doc.id + "'");
        token_count_ += count_whitespace_tokens(doc.text);
    }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

Document parse_document_line(std::string_view line, std::size_t line_no) {
    const auto fail = [&](const std::string& why) {
        return FormatError("line " + std::to_string(line_no) + ": " + why);
    };
    if (!line.empty() && line.front() == '#') throw fail("comment lines are not allowed");
    json record;
    try {
        record = json::parse(line);
    } catch (const json::parse_error& e) {
        throw fail(std::string("invalid JSON (") + e.what() + ")");
    }
    if (!record.is_object()) throw fail("record is not a JSON object");
    auto id = record.find("id");
    auto text = record.find("text");
    if (id == record.end() || !id->is_string()) throw fail("missing string field \"id\"");
    if (text == record.end() || !text->is_string()) throw fail("missing string field \"text\"");
    Document doc{id->get<std::string>(), text->get<std::string>(), std::nullopt};
    if (doc.id.empty()) throw fail("empty \"id\"");
    if (auto source = record.find("source"); source != record.end() && !source->is_null()) {
        if (!source->is_string()) throw fail("\"source\" must be a string");
        doc.source = source->get<std::string>();
    }
    return doc;
}

namespace {

struct FileResult {
    std::vector<Document> docs;
    std::string error;
};

FileResult read_file(const std::filesystem::path& path, std::size_t min_words) {
    FileResult result;
    std::ifstream in(path);
    if (!in) {
        result.error = path.string() + ": cannot open corpus file";
        return result;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            Document doc = parse_document_line(line, line_no);
            if (count_whitespace_tokens(doc.text) >= min_words) result.docs.push_back(std::move(doc));
        } catch (const FormatError& e) {
            result.error = path.string() + ": " + e.what();
            return result;
        }
    }
    return result;
}

}  // namespace

Corpus load_corpus(const std::vector<std::filesystem::path>& paths, std::size_t min_words) {
    if (paths.empty()) throw ConfigError("no corpus files given");
    std::vector<FileResult> shards(paths.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(paths.size()); ++i) {
        shards[i] = read_file(paths[i], min_words);
    }

    std::vector<Document> docs;
    for (auto& shard : shards) {
        if (!shard.error.empty()) throw FormatError(shard.error);
        std::move(shard.docs.begin(), shard.docs.end(), std::back_inserter(docs));
    }
    if (docs.empty()) throw FormatError("corpus is empty after filtering (min_words=" + std::to_string(min_words) + ")");
    try {
        return Corpus(std::move(docs));
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (const auto& doc : corpus) {
        json record = {{"id", doc.id}, {"text", doc.text}};
        if (doc.source) record["source"] = *doc.source;
        out << record.dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> spans;
    const auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
    const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    const auto push_trimmed = [&](std::size_t begin, std::size_t end) {
        while (begin < end && is_ws(text[begin])) ++begin;
        while (end > begin && is_ws(text[end - 1])) --end;
        if (begin < end) spans.emplace_back(text.substr(begin, end - begin));
    };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_terminal(text[i])) {
            while (i < text.size() && is_terminal(text[i])) ++i;
            push_trimmed(start, i);
            start = i;
        } else {
            ++i;
        }
    }
    push_trimmed(start, text.size());
    return spans;
}

std::vector<ContrastivePair> sample_pairs(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("sample_pairs: n must be positive");

    struct Eligible {
        std::size_t doc;
        std::vector<std::string> sentences;
    };
    std::vector<Eligible> eligible;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        auto sentences = split_sentences(corpus[d].text);
        if (sentences.size() < 2) continue;
        const bool has_distinct = std::any_of(sentences.begin() + 1, sentences.end(),
                                              [&](const std::string& s) { return s != sentences.front(); });
        if (has_distinct) eligible.push_back({d, std::move(sentences)});
    }
    if (eligible.empty()) throw ConfigError("sample_pairs: no document has two distinct sentences");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_doc(0, eligible.size() - 1);
    std::vector<ContrastivePair> pairs;
    pairs.reserve(n);
    while (pairs.size() < n) {
        const auto& e = eligible[pick_doc(rng)];
        std::uniform_int_distribution<std::size_t> pick_sentence(0, e.sentences.size() - 1);
        std::size_t a = 0;
        std::size_t b = 0;
        do {
            a = pick_sentence(rng);
            b = pick_sentence(rng);
        } while (a == b || e.sentences[a] == e.sentences[b]);
        pairs.push_back({e.sentences[a], e.sentences[b], corpus[e.doc].id});
    }
    return pairs;
}

}  // namespace regen
