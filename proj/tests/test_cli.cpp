#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "regen/embedding_io.hpp"
#include "regen/encoder.hpp"
#include "test_util.hpp"

using nlohmann::json;
using regen::testing::read_bytes;
using regen::testing::TempDir;

namespace {

const std::string kCli = REGEN_CLI_PATH;
const std::string kSynth = REGEN_SYNTH_PATH;

std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Runs a shell command with output sent to log; returns the exit status.
int run(const std::string& cmd, const std::filesystem::path& log) {
    const int status = std::system((cmd + " >" + quote(log) + " 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

// Small synthetic task with training shortened for test speed.
class CliTask : public ::testing::Test {
protected:
    void SetUp() override {
        ASSERT_EQ(run(kSynth + " --out " + quote(dir.path()) + " --docs-per-class 60", dir / "synth.log"), 0)
            << read_bytes(dir / "synth.log");
        auto task = read_json(dir / "task.json");
        task["encoder"]["pairs"] = 600;
        task["encoder"]["batch_size"] = 50;
        task["encoder"]["dim"] = 16;
        task["k_schedule"] = {15, 5, 5};
        std::ofstream(dir / "task.json") << task.dump(2);
        common = " --config " + quote(dir / "task.json") + " --corpus " + quote(dir / "corpus.jsonl");
    }

    TempDir dir{"cli"};
    std::string common;
};

}  // namespace

TEST(Cli, MissingRequiredOptionExitsWithTwo) {
    TempDir dir("cli");
    EXPECT_EQ(run(kCli + " pipeline --out " + quote(dir / "o"), dir / "log"), 2);
    EXPECT_NE(read_bytes(dir / "log").find("--config"), std::string::npos);
    EXPECT_EQ(run(kCli, dir / "log"), 2);
    EXPECT_EQ(run(kCli + " frobnicate", dir / "log"), 2);
    EXPECT_EQ(run(kCli + " --help", dir / "log"), 0);
}

TEST(Cli, RuntimeErrorExitsWithOne) {
    TempDir dir("cli");
    regen::testing::write_text(dir / "task.json", "{\"classes\": []}");
    regen::testing::write_text(dir / "corpus.jsonl", "{\"id\":\"a\",\"text\":\"one two three\"}\n");
    EXPECT_EQ(run(kCli + " pretrain --config " + quote(dir / "task.json") + " --corpus " + quote(dir / "corpus.jsonl") +
                      " --out " + quote(dir / "e.bin"),
                  dir / "log"),
              1);
    EXPECT_EQ(read_bytes(dir / "log").rfind("error:", 0), 0u) << read_bytes(dir / "log");
}

TEST_F(CliTask, PipelineIsByteDeterministic) {
    ASSERT_EQ(run(kCli + " pipeline" + common + " --out " + quote(dir / "a"), dir / "a.log"), 0) << read_bytes(dir / "a.log");
    ASSERT_EQ(run(kCli + " pipeline" + common + " --out " + quote(dir / "b"), dir / "b.log"), 0) << read_bytes(dir / "b.log");
    for (const char* f : {"dataset.jsonl", "model.bin", "encoder.bin", "report.json"}) {
        const auto a = read_bytes(dir / "a" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, read_bytes(dir / "b" / f)) << f;
    }
    const auto manifest = read_json(dir / "a" / "manifest.json");
    EXPECT_EQ(manifest["rounds"].size(), 3u);
    EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest["stage_seconds"].contains("total"));

    // A different seed changes the output.
    ASSERT_EQ(run(kCli + " pipeline" + common + " --seed 2 --out " + quote(dir / "c"), dir / "c.log"), 0);
    EXPECT_NE(read_bytes(dir / "a" / "model.bin"), read_bytes(dir / "c" / "model.bin"));
}

TEST_F(CliTask, StagedCommandsChain) {
    const auto enc = dir / "enc.bin";
    const auto idx = dir / "corpus.idx";
    ASSERT_EQ(run(kCli + " pretrain" + common + " --out " + quote(enc), dir / "log"), 0) << read_bytes(dir / "log");
    ASSERT_EQ(run(kCli + " index" + common + " --encoder " + quote(enc) + " --approx --out " + quote(idx), dir / "log"), 0)
        << read_bytes(dir / "log");
    ASSERT_EQ(run(kCli + " curate" + common + " --encoder " + quote(enc) + " --index " + quote(idx) + " --out " +
                      quote(dir / "cur"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    const auto dataset = dir / "cur" / "dataset.jsonl";
    ASSERT_EQ(run(kCli + " train --config " + quote(dir / "task.json") + " --encoder " + quote(enc) + " --dataset " +
                      quote(dataset) + " --out " + quote(dir / "m.bin"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    ASSERT_EQ(run(kCli + " eval --encoder " + quote(enc) + " --model " + quote(dir / "m.bin") + " --data " +
                      quote(dir / "held_out.jsonl") + " --out " + quote(dir / "eval.json"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    const auto ev = read_json(dir / "eval.json");
    EXPECT_EQ(ev["examples"].get<int>(), 800);
    EXPECT_GT(ev["accuracy"].get<double>(), 0.25);

    ASSERT_EQ(run(kCli + " metrics --dataset " + quote(dataset) + " --reference " + quote(dir / "corpus.jsonl") +
                      " --model " + quote(dir / "m.bin") + " --encoder " + quote(enc) + " --out " +
                      quote(dir / "metrics.json"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    const auto m = read_json(dir / "metrics.json");
    EXPECT_GT(m["weighted_jaccard"].get<double>(), 0.0);
    EXPECT_GE(m["correctness_proxy"].get<double>(), 0.0);
    EXPECT_EQ(m["per_class_sizes"].size(), 4u);
}

TEST_F(CliTask, PrecomputedEmbeddingsAndAblationFlags) {
    // Export embeddings with the staged encoder, as an external tool would.
    const auto enc = dir / "enc.bin";
    ASSERT_EQ(run(kCli + " pretrain" + common + " --out " + quote(enc), dir / "log"), 0);
    ASSERT_EQ(run(kCli + " index" + common + " --encoder " + quote(enc) + " --out " + quote(dir / "x.idx"), dir / "log"), 0);
    // The index file opens with a plain embedding section; append query records.
    auto file = regen::read_embeddings(dir / "x.idx");
    const auto encoder = regen::load_encoder(enc);
    const auto task = read_json(dir / "task.json");
    for (const auto& c : task["classes"])
        for (const auto& v : c["verbalizers"]) {
            std::string text = c["retrieval_template"].get<std::string>();
            text.replace(text.find("{VERB}"), 6, v.get<std::string>());
            file.records.push_back({"query:" + text, encoder.embed(text).vector});
        }
    regen::write_embeddings(dir / "emb.bin", file.records, file.dim);

    ASSERT_EQ(run(kCli + " pipeline" + common + " --embeddings " + quote(dir / "emb.bin") + " --out " + quote(dir / "p"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    EXPECT_FALSE(std::filesystem::exists(dir / "p" / "encoder.bin"));
    EXPECT_FALSE(read_json(dir / "p" / "manifest.json")["embeddings"].is_null());

    ASSERT_EQ(run(kCli + " pipeline" + common + " --embeddings " + quote(dir / "emb.bin") +
                      " --no-round1-filter --no-filter --out " + quote(dir / "q"),
                  dir / "log"),
              0)
        << read_bytes(dir / "log");
    const auto cfg = read_json(dir / "q" / "manifest.json")["config"];
    EXPECT_FALSE(cfg["round1_filter"].get<bool>());
    EXPECT_FALSE(cfg["consistency_filter"].get<bool>());
    for (const auto& r : read_json(dir / "q" / "report.json")["rounds"]) EXPECT_FALSE(r["filtered"].get<bool>());
}
