#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gqa/program.hpp"
#include "gqa/scene_graph.hpp"
#include "json.hpp"

namespace gqa {

struct ObjectItem {
    std::string id;
    std::string name;
    BBox bbox;
    bool operator==(const ObjectItem&) const = default;
};

struct ObjectsResult {
    std::vector<ObjectItem> items;
    bool operator==(const ObjectsResult&) const = default;
};

struct BooleanResult {
    bool value = false;
    bool operator==(const BooleanResult&) const = default;
};

struct AnswerResult {
    std::string value;
    bool operator==(const AnswerResult&) const = default;
};

using StepResult = std::variant<ObjectsResult, BooleanResult, AnswerResult>;

ResultKind kind_of(const StepResult& r);
std::string describe(const StepResult& r);

/// Attribute category table (color -> {red, blue, ...}).
class AttributeOntology {
public:
    AttributeOntology() = default;
    explicit AttributeOntology(std::map<std::string, std::set<std::string>> categories);

    /// Built-in table covering the common GQA categories.
    static const AttributeOntology& builtin();
    /// JSON object {category: [attribute, ...]}.
    static AttributeOntology from_json(const nlohmann::json& doc);
    static AttributeOntology load(const std::filesystem::path& path);

    bool has_category(std::string_view category) const;
    bool in_category(std::string_view category, std::string_view attribute) const;
    const std::map<std::string, std::set<std::string>, std::less<>>& categories() const { return categories_; }

private:
    std::map<std::string, std::set<std::string>, std::less<>> categories_;
};

struct ExecOptions {
    const AttributeOntology* ontology = &AttributeOntology::builtin();
    /// When set, select/relate rules that come back empty raise MissingAnnotation
    /// instead of propagating the empty set.
    bool strict = false;
};

enum class ExecErrorKind {
    RuleTypeMismatch,
    UnknownPredicateCategory,
    EmptyInputToQuery,
    MissingAttribute,
    MissingAnnotation,
};

std::string_view to_string(ExecErrorKind k);

class ExecError : public std::runtime_error {
public:
    ExecError(ExecErrorKind kind, const std::string& what, std::optional<std::size_t> node = std::nullopt);
    ExecErrorKind kind() const { return kind_; }
    std::optional<std::size_t> node() const { return node_; }
    const std::string& detail() const { return detail_; }

private:
    ExecErrorKind kind_;
    std::string detail_;
    std::optional<std::size_t> node_;
};

struct ExecutionTrace {
    std::string question_id;
    std::string image_id;
    std::vector<StepResult> per_node;
    /// yes/no for a Boolean root, the answer text for an Answer root, absent
    /// when the root yields objects.
    std::optional<std::string> final_answer;
    std::vector<std::string> warnings;
};

/// Applies one rule. `inputs` are the results of the node's ref args, in order.
StepResult eval_node(const FunctionSpec& spec, const std::vector<StepResult>& inputs,
                     const std::vector<std::string>& text_args, const SceneGraph& g,
                     const ExecOptions& opts = {}, std::vector<std::string>* warnings = nullptr);

/// Runs every node layer by layer. Errors carry the failing node index.
ExecutionTrace execute(const ProgramTree& tree, const SceneGraph& g, const ExecOptions& opts = {});

/// Boolean -> yes/no, Answer passes through, Objects has no answer.
std::optional<std::string> answer_of(const StepResult& r);

/// One trace as a JSONL record: {qid, image, steps: [...], answer}.
nlohmann::json trace_to_json(const ExecutionTrace& trace);

}  // namespace gqa
