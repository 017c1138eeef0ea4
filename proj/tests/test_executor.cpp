#include <random>

#include "doctest.h"
#include "gqa/executor.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace gqa;

namespace {

const SceneGraph& sg_a() {
    static const SceneGraphStore store = load_scene_graphs(GQA_FIXTURES "/sg_a.json");
    return store.at("img_a");
}

std::vector<std::string> ids_of(const StepResult& r) {
    std::vector<std::string> out;
    for (const auto& it : std::get<ObjectsResult>(r).items) out.push_back(it.id);
    return out;
}

ObjectsResult objects(std::initializer_list<const char*> ids) {
    ObjectsResult r;
    for (const auto* id : ids) {
        const auto& o = sg_a().at(id);
        r.items.push_back({o.id, o.name, o.bbox});
    }
    return r;
}

ExecErrorKind exec_error(const std::string& src, ExecOptions opts = {}) {
    try {
        execute(parse_program(src), sg_a(), opts);
    } catch (const ExecError& e) {
        return e.kind();
    }
    FAIL("expected ExecError for " << src);
    return ExecErrorKind::RuleTypeMismatch;
}

}  // namespace

TEST_CASE("select alone yields objects and no answer") {
    auto trace = execute(parse_program("select(pillow)"), sg_a());
    CHECK(ids_of(trace.per_node[0]) == std::vector<std::string>{"o1", "o2"});
    CHECK_FALSE(trace.final_answer.has_value());
    CHECK(execute(parse_program("select(pillow);exist([0])"), sg_a()).final_answer == "yes");
}

TEST_CASE("filter chain") {
    auto trace = execute(parse_program("select(pillow);filter_attr([0],white);exist([1])"), sg_a());
    REQUIRE(trace.per_node.size() == 3);
    CHECK(ids_of(trace.per_node[0]) == std::vector<std::string>{"o1", "o2"});
    CHECK(ids_of(trace.per_node[1]) == std::vector<std::string>{"o1"});
    CHECK(trace.per_node[2] == StepResult{BooleanResult{true}});
    CHECK(trace.final_answer == "yes");
    CHECK(trace.image_id == "img_a");
}

TEST_CASE("empty select forces false") {
    auto trace = execute(parse_program("select(dog);exist([0])"), sg_a());
    CHECK(std::get<ObjectsResult>(trace.per_node[0]).items.empty());
    CHECK(trace.per_node[1] == StepResult{BooleanResult{false}});
    CHECK(trace.final_answer == "no");
}

TEST_CASE("eval_node rules on SG-A") {
    const auto& g = sg_a();
    CHECK(eval_node(*find_function("exist"), {objects({"o1"})}, {}, g) == StepResult{BooleanResult{true}});
    CHECK(eval_node(*find_function("relate_inv_name"), {objects({"o3"})}, {"on", "pillow"}, g) ==
          StepResult{objects({"o1", "o2"})});
    CHECK(eval_node(*find_function("query_name"), {objects({"o1"})}, {}, g) == StepResult{AnswerResult{"pillow"}});
    CHECK(eval_node(*find_function("relate_name"), {objects({"o1"})}, {"on", "couch"}, g) ==
          StepResult{objects({"o3"})});
    CHECK(eval_node(*find_function("relate"), {objects({"o1", "o2"})}, {"on"}, g) == StepResult{objects({"o3"})});
    CHECK(eval_node(*find_function("verify_attr"), {objects({"o1", "o2"})}, {"blue"}, g) ==
          StepResult{BooleanResult{true}});
    CHECK(eval_node(*find_function("verify_rel"), {objects({"o2"})}, {"on", "couch"}, g) ==
          StepResult{BooleanResult{true}});
    CHECK(eval_node(*find_function("filter_not_attr"), {objects({"o1", "o2"})}, {"white"}, g) ==
          StepResult{objects({"o2"})});
    CHECK(eval_node(*find_function("query_attr"), {objects({"o2"})}, {"color"}, g) == StepResult{AnswerResult{"blue"}});
    CHECK(eval_node(*find_function("choose_attr"), {objects({"o1"})}, {"color", "blue", "white"}, g) ==
          StepResult{AnswerResult{"white"}});
    CHECK(eval_node(*find_function("choose_name"), {objects({"o1", "o3"})}, {"couch", "chair"}, g) ==
          StepResult{AnswerResult{"couch"}});
    CHECK(eval_node(*find_function("compare_same"), {objects({"o1"}), objects({"o2"})}, {"color"}, g) ==
          StepResult{BooleanResult{false}});
    CHECK(eval_node(*find_function("compare_diff"), {objects({"o1"}), objects({"o2"})}, {"color"}, g) ==
          StepResult{BooleanResult{true}});
    CHECK(eval_node(*find_function("and"), {BooleanResult{true}, BooleanResult{false}}, {}, g) ==
          StepResult{BooleanResult{false}});
    CHECK(eval_node(*find_function("or"), {BooleanResult{true}, BooleanResult{false}}, {}, g) ==
          StepResult{BooleanResult{true}});
}

TEST_CASE("query on multiple objects uses the first and warns") {
    auto trace = execute(parse_program("select(couch);relate_inv_name([0],on,pillow);query_name([1])"), sg_a());
    CHECK(trace.final_answer == "pillow");
    CHECK(trace.warnings.size() == 1);
}

TEST_CASE("execution errors") {
    CHECK(exec_error("select(a);select(b);and([0],[1])") == ExecErrorKind::RuleTypeMismatch);
    CHECK(exec_error("select(pillow);exist([0]);filter_attr([1],x);exist([2])") == ExecErrorKind::RuleTypeMismatch);
    CHECK(exec_error("select(pillow);query_attr([0],flavor)") == ExecErrorKind::UnknownPredicateCategory);
    CHECK(exec_error("select(dog);query_name([0])") == ExecErrorKind::EmptyInputToQuery);
    CHECK(exec_error("select(couch);query_attr([0],color)") == ExecErrorKind::MissingAttribute);
    CHECK(exec_error("select(dog);exist([0])", {&AttributeOntology::builtin(), true}) ==
          ExecErrorKind::MissingAnnotation);
    try {
        execute(parse_program("select(dog);query_name([0])"), sg_a());
    } catch (const ExecError& e) {
        CHECK(e.node() == 1);
    }
}

TEST_CASE("custom attribute categories") {
    AttributeOntology ont(std::map<std::string, std::set<std::string>>{{"Hue", {"White", "blue"}}});
    CHECK(ont.has_category("hue"));
    CHECK(ont.in_category("hue", "white"));
    auto trace = execute(parse_program("select(pillow);filter_attr([0],white);query_attr([1],hue)"), sg_a(), {&ont});
    CHECK(trace.final_answer == "white");
    CHECK(AttributeOntology::from_json(nlohmann::json::parse(R"({"shape": ["round"]})")).in_category("shape", "round"));
}

TEST_CASE("trace dump format") {
    auto trace = execute(parse_program("select(pillow);filter_attr([0],white);exist([1])"), sg_a());
    trace.question_id = "q1";
    auto j = trace_to_json(trace);
    CHECK(j["qid"] == "q1");
    CHECK(j["image"] == "img_a");
    CHECK(j["answer"] == "yes");
    CHECK(j["steps"][0]["tag"] == "objects");
    CHECK(j["steps"][1]["items"][0]["id"] == "o1");
    CHECK(j["steps"][1]["items"][0]["bbox"] == nlohmann::json::array({50.0, 100.0, 120.0, 160.0}));
    CHECK(j["steps"][2] == nlohmann::json({{"tag", "bool"}, {"value", true}}));
}

TEST_CASE("executor agrees with the brute-force oracle on random inputs") {
    testing::Rng rng(2024);
    const auto& ont = AttributeOntology::builtin();
    int failures_seen = 0;
    for (int trial = 0; trial < 300; ++trial) {
        auto g = testing::random_scene_graph(rng);
        auto tree = parse_program(testing::random_program(rng));
        for (bool strict : {false, true}) {
            auto expect = testing::oracle_execute(tree, g, ont, strict);
            try {
                auto trace = execute(tree, g, {&ont, strict});
                REQUIRE_FALSE(expect.first_failure.has_value());
                for (std::size_t i = 0; i < tree.size(); ++i) {
                    CHECK(trace.per_node[i] == *expect.nodes[i].result);
                    CHECK(kind_of(trace.per_node[i]) == tree.node(i).spec->result_kind);
                }
                CHECK(trace.final_answer == expect.final_answer);
                auto again = execute(tree, g, {&ont, strict});
                CHECK(again.per_node == trace.per_node);
            } catch (const ExecError& e) {
                ++failures_seen;
                REQUIRE(expect.first_failure.has_value());
                CHECK(e.node() == expect.first_failure);
                CHECK(to_string(e.kind()) == expect.nodes[*expect.first_failure].error);
            }
        }
    }
    CHECK(failures_seen > 0);
}

TEST_CASE("objects rules propagate empty input") {
    const auto& g = sg_a();
    for (const auto& spec : function_catalog()) {
        if (spec.result_kind != ResultKind::Objects || spec.ref_input_kind() != ResultKind::Objects) continue;
        if (spec.arg_kinds.empty() || spec.arg_kinds[0] != ArgKind::Ref) continue;
        std::vector<std::string> text(spec.arity() - 1, "pillow");
        auto r = eval_node(spec, {ObjectsResult{}}, text, g);
        CHECK(std::get<ObjectsResult>(r).items.empty());
    }
}
