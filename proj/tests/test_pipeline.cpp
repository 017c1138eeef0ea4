#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "gqa/pipeline.hpp"
#include "json.hpp"

using namespace gqa;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return fs::path(GQA_FIXTURES) / name; }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "gqa_pipeline_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig fixture_config(const char* programs = "programs.jsonl") {
    RunConfig cfg;
    cfg.scene_graphs = fixture("sg_a.json");
    cfg.programs = fixture(programs);
    cfg.codec.seed = 42;
    return cfg;
}

int run_cli(const std::string& args) {
    int status = std::system((std::string(GQA_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("read_questions") {
    std::istringstream in(R"J({"qid":"q","image":"i","program":"select(a);exist([0])","answer":" Yes "}

{"qid":"r","image":"i","program":"select(b);exist([0])"}
)J");
    auto qs = read_questions(in);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].gold == "yes");
    CHECK_FALSE(qs[1].gold.has_value());
    std::istringstream bad(R"J({"qid":"q","image":"i"})J");
    CHECK_THROWS_AS(read_questions(bad), InputError);
}

TEST_CASE("step seeds depend only on run seed, qid and step") {
    CHECK(step_seed(1, "q1", 0) == step_seed(1, "q1", 0));
    CHECK(step_seed(1, "q1", 0) != step_seed(1, "q1", 1));
    CHECK(step_seed(1, "q1", 0) != step_seed(2, "q1", 0));
    CHECK(step_seed(1, "q1", 0) != step_seed(1, "q2", 0));
}

TEST_CASE("compile the bundled fixtures") {
    auto cfg = fixture_config();
    cfg.out = scratch("corpus.jsonl");
    std::ostringstream out, err;
    REQUIRE(run_compile(cfg, out, err) == kExitOk);
    auto text = slurp(cfg.out);
    std::istringstream lines(text);
    std::vector<nlohmann::json> rows;
    for (std::string l; std::getline(lines, l);) rows.push_back(nlohmann::json::parse(l));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0]["qid"] == "q1");
    CHECK(rows[0]["program"] == "select(pillow);filter_attr([0],white);exist([1])");
    CHECK(rows[0]["answer"] == "yes");
    CHECK(rows[0]["steps"][1] == nlohmann::json::array({256, 25, 64, 61, 102, 258}));
    CHECK(rows[0]["steps"][2] == nlohmann::json::array({256, 259, 258}));
    CHECK(rows[0]["steps"][0].size() == 11);
    CHECK(rows[0]["cfg"] == nlohmann::json({{"bins", 256}, {"max_objects", 4}, {"format", "coords"}, {"shuffle_seed", 42}}));
    CHECK(rows[2]["answer"] == "pillow");
    CHECK(out.str().find("compiled: 3") != std::string::npos);
    CHECK(out.str().find("skipped: 0") != std::string::npos);
    CHECK(load_vocab(fs::path(cfg.out) += ".answers.txt") == std::vector<std::string>{"pillow"});
    CHECK(load_vocab(fs::path(cfg.out) += ".names.txt") == std::vector<std::string>{"couch", "pillow"});
}

TEST_CASE("compile output is independent of worker count") {
    std::string reference;
    for (std::size_t workers : {1, 2, 4, 8}) {
        auto cfg = fixture_config();
        cfg.workers = workers;
        cfg.out = scratch("corpus_w" + std::to_string(workers) + ".jsonl");
        std::ostringstream out, err;
        REQUIRE(run_compile(cfg, out, err) == kExitOk);
        auto text = slurp(cfg.out);
        if (reference.empty()) reference = text;
        CHECK(text == reference);
    }
}

TEST_CASE("skips are counted and strict mode fails") {
    std::vector<QuestionSpec> qs = {
        {"b", "img_a", "select(dog);exist([0])", std::nullopt},
        {"a", "img_a", "select(pillow);query_name([0])", std::nullopt},
        {"c", "img_a", "select(pillow", std::nullopt},
        {"d", "nowhere", "select(pillow);exist([0])", std::nullopt},
        {"e", "img_a", "select(couch);query_attr([0],color)", std::nullopt},
        {"a", "img_a", "select(couch);exist([0])", std::nullopt},
        {"f", "img_a", "select(couch)", std::nullopt},
    };
    auto store = load_scene_graphs(fixture("sg_a.json"));
    CodecConfig codec;
    auto corpus = compile_corpus(qs, store, codec, {});
    CHECK(corpus.summary.total == 7);
    CHECK(corpus.summary.compiled == 2);
    CHECK(corpus.summary.compiled + corpus.summary.skipped == corpus.summary.total);
    CHECK(corpus.summary.skip_reasons.at("SyntaxError") == 1);
    CHECK(corpus.summary.skip_reasons.at("MissingImage") == 1);
    CHECK(corpus.summary.skip_reasons.at("MissingAttribute") == 1);
    CHECK(corpus.summary.skip_reasons.at("DuplicateQid") == 1);
    CHECK(corpus.summary.skip_reasons.at("NonAnswerRoot") == 1);
    CHECK(nlohmann::json::parse(corpus.lines[0])["qid"] == "a");
    CHECK(nlohmann::json::parse(corpus.lines[0])["program"] == "select(pillow);query_name([0])");

    CompileOptions strict;
    strict.strict = true;
    strict.exec.strict = true;
    CHECK_THROWS_AS(compile_corpus(qs, store, codec, strict), InputError);

    CodecConfig fixed;
    fixed.answer_vocab = {"yes", "no"};
    auto oov = compile_corpus({{"x", "img_a", "select(pillow);query_name([0])", std::nullopt}}, store, fixed, {});
    CHECK(oov.summary.skip_reasons.at("OutOfVocab") == 1);
}

TEST_CASE("strict compile exits 1 on a name absent from the graph") {
    auto cfg = fixture_config("programs_missing_name.jsonl");
    cfg.out = scratch("strict.jsonl");
    cfg.strict = true;
    std::ostringstream out, err;
    CHECK(run_compile(cfg, out, err) == kExitInputError);
    cfg.strict = false;
    CHECK(run_compile(cfg, out, err) == kExitOk);
}

TEST_CASE("empty program file") {
    auto cfg = fixture_config("programs_empty.jsonl");
    cfg.out = scratch("empty.jsonl");
    std::ostringstream out, err;
    CHECK(run_compile(cfg, out, err) == kExitOk);
    CHECK(slurp(cfg.out).empty());
    CHECK(err.str().find("warning") != std::string::npos);
}

TEST_CASE("unreadable inputs exit 1") {
    auto cfg = fixture_config();
    cfg.scene_graphs = "/nonexistent.json";
    cfg.out = scratch("never.jsonl");
    std::ostringstream out, err;
    CHECK(run_compile(cfg, out, err) == kExitInputError);
}

TEST_CASE("eval") {
    std::ostringstream out, err;
    auto report = scratch("report.json");
    REQUIRE(run_eval(fixture("predictions_rc.jsonl"), 3, report, out, err) == kExitOk);
    auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["rc"]["1"] == 1.0);
    CHECK(j["rc"]["2"] == 1.0);
    CHECK(j["rc"]["3"] == 1.0);
    CHECK(j["acc_sub"] == 1.0);
    CHECK(out.str().find("RC(1)") != std::string::npos);

    std::ostringstream o2, e2;
    REQUIRE(run_eval(fixture("predictions_one.jsonl"), 3, report, o2, e2) == kExitOk);
    j = nlohmann::json::parse(slurp(report));
    CHECK(j["acc"] == 1.0);
    CHECK(j["rc"]["1"] == "n/a");

    std::ostringstream o3, e3;
    CHECK(run_eval(fixture("predictions_malformed.jsonl"), 3, "", o3, e3) == kExitInputError);
    CHECK(e3.str().find("line 2") != std::string::npos);
    CHECK(run_eval(fixture("predictions_dangling.jsonl"), 3, "", o3, e3) == kExitLinkError);
}

TEST_CASE("inspect") {
    auto cfg = fixture_config();
    cfg.qid = "q1";
    std::ostringstream out, err;
    REQUIRE(run_inspect(cfg, out, err) == kExitOk);
    auto text = out.str();
    CHECK(text.find("[2] exist([1])") != std::string::npos);
    CHECK(text.find("[BEG] 25 64 61 102 [END]") != std::string::npos);
    CHECK(text.find("[BEG] TRUE [END]") != std::string::npos);
    CHECK(text.rfind("answer: yes") != std::string::npos);

    cfg.qid = "nope";
    CHECK(run_inspect(cfg, out, err) == kExitNotFound);
    auto lost = fixture_config("programs_missing_image.jsonl");
    lost.qid = "q_lost";
    std::ostringstream e2;
    CHECK(run_inspect(lost, out, e2) == kExitNotFound);
    CHECK(e2.str().find("NotFound(image)") != std::string::npos);
}

TEST_CASE("command line exit codes") {
    std::string sg = "--scene-graphs " + fixture("sg_a.json").string();
    std::string progs = "--programs " + fixture("programs.jsonl").string();
    CHECK(run_cli("compile " + sg + " " + progs + " --out " + scratch("cli.jsonl").string()) == 0);
    CHECK(run_cli("compile " + sg + " --programs " + fixture("programs_missing_name.jsonl").string() + " --strict --out " +
                  scratch("cli_strict.jsonl").string()) == 1);
    CHECK(run_cli("eval " + fixture("predictions_rc.jsonl").string()) == 0);
    CHECK(run_cli("eval " + fixture("predictions_malformed.jsonl").string()) == 1);
    CHECK(run_cli("eval " + fixture("predictions_dangling.jsonl").string()) == 2);
    CHECK(run_cli("inspect q1 " + sg + " " + progs) == 0);
    CHECK(run_cli("inspect nope " + sg + " " + progs) == 3);
    CHECK(run_cli("compile --bins 1 " + sg + " " + progs + " --out /dev/null") == 1);
    CHECK(run_cli("frobnicate") == 1);
}

TEST_CASE("config file values are overridden by flags") {
    auto conf = scratch("run.toml");
    std::ofstream(conf) << "bins = 64\nseed = 9\nscene-graphs = \"" << fixture("sg_a.json").string()
                        << "\"\nprograms = \"" << fixture("programs.jsonl").string() << "\"\n";
    auto out64 = scratch("conf64.jsonl");
    auto out128 = scratch("conf128.jsonl");
    REQUIRE(run_cli("compile --config " + conf.string() + " --out " + out64.string()) == 0);
    REQUIRE(run_cli("compile --config " + conf.string() + " --bins 128 --out " + out128.string()) == 0);
    std::istringstream a(slurp(out64)), b(slurp(out128));
    std::string la, lb;
    std::getline(a, la);
    std::getline(b, lb);
    CHECK(nlohmann::json::parse(la)["cfg"]["bins"] == 64);
    CHECK(nlohmann::json::parse(la)["cfg"]["shuffle_seed"] == 9);
    CHECK(nlohmann::json::parse(lb)["cfg"]["bins"] == 128);
}
