#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "regen/corpus.hpp"
#include "regen/error.hpp"
#include "regen/text.hpp"
#include "test_util.hpp"

using namespace regen;
using regen::testing::TempDir;
using regen::testing::write_text;

namespace {

std::string words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
    return s;
}

std::string jsonl_line(const std::string& id, const std::string& text) {
    return nlohmann::json{{"id", id}, {"text", text}}.dump() + "\n";
}

// Independent sentence splitter: regex over "non-terminal run + terminal run",
// then whatever is left, trimmed.
std::vector<std::string> regex_split(const std::string& text) {
    static const std::regex piece(R"([^.!?]*[.!?]+|[^.!?]+$)");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), piece); it != std::sregex_iterator(); ++it) {
        std::string s = it->str();
        const auto b = s.find_first_not_of(" \t\n\r");
        if (b == std::string::npos) continue;
        const auto e = s.find_last_not_of(" \t\n\r");
        out.push_back(s.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

TEST(Corpus, MinWordsThreshold) {
    TempDir dir("corpus");
    write_text(dir / "c.jsonl", jsonl_line("a", words(12)) + jsonl_line("b", words(5)) + jsonl_line("c", words(20)));
    const auto corpus = load_corpus({dir / "c.jsonl"}, 10);
    ASSERT_EQ(corpus.size(), 2u);
    EXPECT_EQ(corpus[0].id, "a");
    EXPECT_EQ(corpus[1].id, "c");
    EXPECT_EQ(corpus.token_count(), 32u);

    EXPECT_EQ(load_corpus({dir / "c.jsonl"}, 0).size(), 3u);
}

TEST(Corpus, ThresholdAtBoundaryIsInclusive) {
    TempDir dir("corpus");
    write_text(dir / "c.jsonl", jsonl_line("a", words(9)) + jsonl_line("b", words(10)));
    const auto corpus = load_corpus({dir / "c.jsonl"}, 10);
    ASSERT_EQ(corpus.size(), 1u);
    EXPECT_EQ(corpus[0].id, "b");
}

TEST(Corpus, RecountOracle) {
    TempDir dir("corpus");
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(0, 25);
    std::uniform_int_distribution<int> gap(1, 3);
    std::string content;
    std::vector<std::pair<std::string, std::size_t>> expected;
    for (int i = 0; i < 1000; ++i) {
        const int n = len(rng);
        std::string text;
        for (int w = 0; w < n; ++w) {
            text += std::string(static_cast<std::size_t>(gap(rng)), w % 3 == 0 ? '\t' : ' ');
            text += "tok" + std::to_string(w);
        }
        const std::string id = "doc" + std::to_string(i);
        content += jsonl_line(id, text);
        if (n >= 10) expected.emplace_back(id, static_cast<std::size_t>(n));
    }
    write_text(dir / "c.jsonl", content);
    const auto corpus = load_corpus({dir / "c.jsonl"}, 10);
    ASSERT_EQ(corpus.size(), expected.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_EQ(corpus[i].id, expected[i].first);
        EXPECT_EQ(count_whitespace_tokens(corpus[i].text), expected[i].second);
        total += expected[i].second;
    }
    EXPECT_EQ(corpus.token_count(), total);
}

TEST(Corpus, MultipleFilesKeepFileOrder) {
    TempDir dir("corpus");
    for (int f = 0; f < 6; ++f) {
        std::string content;
        for (int i = 0; i < 5; ++i) content += jsonl_line("f" + std::to_string(f) + "_" + std::to_string(i), words(10));
        write_text(dir / ("p" + std::to_string(f) + ".jsonl"), content);
    }
    std::vector<std::filesystem::path> paths;
    for (int f = 5; f >= 0; --f) paths.push_back(dir / ("p" + std::to_string(f) + ".jsonl"));
    const auto corpus = load_corpus(paths);
    ASSERT_EQ(corpus.size(), 30u);
    EXPECT_EQ(corpus[0].id, "f5_0");
    EXPECT_EQ(corpus[29].id, "f0_4");
}

TEST(Corpus, RejectsBadInput) {
    TempDir dir("corpus");
    write_text(dir / "bad.jsonl", jsonl_line("a", words(12)) + "{not json\n");
    try {
        load_corpus({dir / "bad.jsonl"});
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }

    write_text(dir / "dup.jsonl", jsonl_line("a", words(12)) + jsonl_line("a", words(12)));
    EXPECT_THROW(load_corpus({dir / "dup.jsonl"}), FormatError);

    write_text(dir / "short.jsonl", jsonl_line("a", words(3)));
    EXPECT_THROW(load_corpus({dir / "short.jsonl"}), FormatError);

    EXPECT_THROW(load_corpus({dir / "missing.jsonl"}), FormatError);
    EXPECT_THROW(load_corpus({}), ConfigError);
}

TEST(Corpus, ParseDocumentLine) {
    const auto doc = parse_document_line(R"({"id":"x","text":"hello","source":"web"})", 1);
    EXPECT_EQ(doc.id, "x");
    EXPECT_EQ(doc.text, "hello");
    ASSERT_TRUE(doc.source.has_value());
    EXPECT_EQ(*doc.source, "web");

    EXPECT_FALSE(parse_document_line(R"({"id":"x","text":"t","source":null})", 1).source.has_value());
    EXPECT_THROW(parse_document_line(R"({"text":"t"})", 1), FormatError);
    EXPECT_THROW(parse_document_line(R"({"id":3,"text":"t"})", 1), FormatError);
    EXPECT_THROW(parse_document_line(R"({"id":"","text":"t"})", 1), FormatError);
    EXPECT_THROW(parse_document_line(R"(["id","text"])", 1), FormatError);
    EXPECT_THROW(parse_document_line(R"(# comment)", 1), FormatError);
}

TEST(Corpus, WriteThenLoadRoundTrip) {
    TempDir dir("corpus");
    Corpus original({{"a", words(11), std::string("s1")}, {"b", "caf\xc3\xa9 " + words(10), std::nullopt}});
    write_corpus(original, dir / "out.jsonl");
    const auto back = load_corpus({dir / "out.jsonl"});
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].source, std::optional<std::string>("s1"));
    EXPECT_EQ(back[1].text, original[1].text);
    EXPECT_EQ(back.find("b"), std::optional<std::size_t>(1));
    EXPECT_FALSE(back.find("zz").has_value());
}

TEST(SplitSentences, Examples) {
    EXPECT_EQ(split_sentences("A. B? C!"), (std::vector<std::string>{"A.", "B?", "C!"}));
    EXPECT_EQ(split_sentences("no terminal punctuation here"),
              (std::vector<std::string>{"no terminal punctuation here"}));
    EXPECT_EQ(split_sentences("Wait... what?! ok"), (std::vector<std::string>{"Wait...", "what?!", "ok"}));
    EXPECT_TRUE(split_sentences("").empty());
    EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(SplitSentences, RegexOracle) {
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces = {"alpha", "beta", "gamma", "delta", "x", "42"};
    const std::vector<std::string> marks = {".", "!", "?", "...", "?!", ""};
    const std::vector<std::string> gaps = {" ", "  ", "\t", "\n", ""};
    for (int p = 0; p < 50; ++p) {
        std::string text;
        const int n = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < n; ++i) {
            text += gaps[rng() % gaps.size()];
            text += pieces[rng() % pieces.size()];
            if (rng() % 3 == 0) text += marks[rng() % marks.size()];
        }
        EXPECT_EQ(split_sentences(text), regex_split(text)) << "text: \"" << text << "\"";
    }
}

TEST(SamplePairs, TwoSentenceDocs) {
    Corpus corpus({{"a", "First one here. Second one here.", std::nullopt},
                   {"b", "Only a single sentence", std::nullopt},
                   {"c", "Same. Same.", std::nullopt},
                   {"d", "Left side! Right side?", std::nullopt}});
    const auto pairs = sample_pairs(corpus, 200, 3);
    ASSERT_EQ(pairs.size(), 200u);
    for (const auto& p : pairs) {
        ASSERT_TRUE(p.doc_id == "a" || p.doc_id == "d") << p.doc_id;
        EXPECT_NE(p.anchor_text, p.positive_text);
        const auto doc = corpus[*corpus.find(p.doc_id)];
        const auto sentences = split_sentences(doc.text);
        EXPECT_NE(std::find(sentences.begin(), sentences.end(), p.anchor_text), sentences.end());
        EXPECT_NE(std::find(sentences.begin(), sentences.end(), p.positive_text), sentences.end());
    }
}

TEST(SamplePairs, DeterministicInSeed) {
    std::vector<Document> docs;
    for (int i = 0; i < 30; ++i)
        docs.push_back({"d" + std::to_string(i), "One " + std::to_string(i) + ". Two. Three? Four!", std::nullopt});
    Corpus corpus(std::move(docs));
    const auto a = sample_pairs(corpus, 100, 9);
    const auto b = sample_pairs(corpus, 100, 9);
    const auto c = sample_pairs(corpus, 100, 10);
    ASSERT_EQ(a.size(), b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].anchor_text, b[i].anchor_text);
        EXPECT_EQ(a[i].positive_text, b[i].positive_text);
        EXPECT_EQ(a[i].doc_id, b[i].doc_id);
        differs |= a[i].doc_id != c[i].doc_id || a[i].anchor_text != c[i].anchor_text;
    }
    EXPECT_TRUE(differs);
}

TEST(SamplePairs, DocumentsDrawnUniformly) {
    std::vector<Document> docs;
    for (int i = 0; i < 100; ++i)
        docs.push_back({"d" + std::to_string(i), "Alpha " + std::to_string(i) + ". Beta. Gamma.", std::nullopt});
    Corpus corpus(std::move(docs));
    const auto pairs = sample_pairs(corpus, 10000, 17);
    std::map<std::string, int> counts;
    for (const auto& p : pairs) ++counts[p.doc_id];
    ASSERT_EQ(counts.size(), 100u);
    // Each count is Binomial(10000, 0.01): mean 100, sd ~9.95.
    const double sd = std::sqrt(10000 * 0.01 * 0.99);
    double chi2 = 0.0;
    for (const auto& [id, n] : counts) {
        EXPECT_LT(std::abs(n - 100.0), 4 * sd) << id;
        chi2 += (n - 100.0) * (n - 100.0) / 100.0;
    }
    // 99 degrees of freedom, p = 0.001 critical value.
    EXPECT_LT(chi2, 148.2);
}

TEST(SamplePairs, NoEligibleDocuments) {
    Corpus corpus({{"a", "single sentence", std::nullopt}});
    EXPECT_THROW(sample_pairs(corpus, 5, 1), Error);
}
