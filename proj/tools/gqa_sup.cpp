// gqa-sup: compile intermediate-supervision corpora from programs and scene
// graphs, evaluate prediction files, and inspect single questions.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gqa/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Symbolic program execution and supervision-sequence compiler for GQA-style data"};
    app.set_config("--config", "", "Key-value config file (TOML/INI); flags on the command line win");
    app.require_subcommand(1);
    app.fallthrough();

    gqa::RunConfig cfg;
    std::string scene_graphs, programs, out, answer_vocab, name_vocab, categories, format = "coords", report;
    bool shuffle = true;

    app.add_option("--scene-graphs", scene_graphs, "Scene graph JSON (GQA layout)");
    app.add_option("--programs", programs, "Programs JSONL: {qid, image, program, answer?}");
    app.add_option("--out", out, "Output path (corpus JSONL for compile, report JSON for eval)");
    app.add_option("--answer-vocab", answer_vocab, "Answer vocabulary, one entry per line");
    app.add_option("--name-vocab", name_vocab, "Object-name vocabulary, one entry per line");
    app.add_option("--categories", categories, "Attribute category table JSON {category: [attr...]}");
    app.add_option("--bins", cfg.codec.bins, "Coordinate quantization bins")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    app.add_option("--max-objects", cfg.codec.max_objects, "Objects kept per step")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--format", format, "Object group layout")
        ->capture_default_str()
        ->check(CLI::IsMember({"coords", "name-first", "name-last"}));
    app.add_flag("--shuffle,!--no-shuffle", shuffle, "Shuffle object order before truncation (default: on)");
    app.add_option("--seed", cfg.codec.seed, "Shuffle seed")->capture_default_str();
    app.add_flag("--strict", cfg.strict, "Fail on the first unanswerable question");
    app.add_option("--workers", cfg.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--k-max", cfg.k_max, "Largest k for RC(k)")->capture_default_str()->check(CLI::PositiveNumber);

    auto* compile = app.add_subcommand("compile", "Execute programs and write the supervision corpus");
    auto* eval = app.add_subcommand("eval", "Accuracy and reasoning consistency for a predictions file");
    std::string predictions;
    eval->add_option("predictions", predictions, "Predictions JSONL {qid, predicted, gold, class?, parent?}")->required();
    auto* inspect = app.add_subcommand("inspect", "Print the step-by-step trace for one question");
    inspect->add_option("qid", cfg.qid, "Question id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return gqa::kExitInputError;
    }

    cfg.scene_graphs = scene_graphs;
    cfg.programs = programs;
    cfg.out = out;
    cfg.answer_vocab = answer_vocab;
    cfg.name_vocab = name_vocab;
    cfg.categories = categories;
    cfg.codec.shuffle = shuffle;
    cfg.codec.format = gqa::parse_object_format(format);

    if (*compile || *inspect) {
        if (scene_graphs.empty() || programs.empty()) {
            std::cerr << "error: --scene-graphs and --programs are required\n";
            return gqa::kExitInputError;
        }
    }
    if (*compile) return gqa::run_compile(cfg, std::cout, std::cerr);
    if (*eval) return gqa::run_eval(predictions, cfg.k_max, cfg.out, std::cout, std::cerr);
    return gqa::run_inspect(cfg, std::cout, std::cerr);
}
