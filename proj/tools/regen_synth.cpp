// regen_synth: writes the clustered toy corpus, a matching task config, a
// labeled held-out split and the ground-truth labels.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regen/corpus.hpp"
#include "regen/synthetic.hpp"
#include "regen/task_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic benchmark corpus"};
    regen::SyntheticSpec spec;
    std::string out;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--seed", spec.seed, "Generator seed");
    app.add_option("--docs-per-class", spec.docs_per_class, "Clean documents per class");
    app.add_option("--distractors", spec.distractor_fraction, "Distractor count relative to clean documents");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto data = regen::make_synthetic(spec);
        const fs::path dir(out);
        fs::create_directories(dir);
        regen::write_corpus(data.corpus, dir / "corpus.jsonl");

        regen::TaskConfig task{data.classes, regen::synthetic_pipeline_config()};
        std::ofstream(dir / "task.json") << regen::to_json(task).dump(2) << '\n';

        std::ofstream held(dir / "held_out.jsonl");
        for (const auto& e : data.held_out) held << json{{"text", e.text}, {"label", e.label}}.dump() << '\n';

        const std::map<std::string, int> truth(data.truth.begin(), data.truth.end());
        std::ofstream(dir / "truth.json") << json(truth).dump() << '\n';
        std::cerr << "wrote " << data.corpus.size() << " documents to " << dir.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
