#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gqa {

/// Maximum number of nodes in a program tree.
inline constexpr std::size_t kMaxProgramNodes = 9;
/// Text arguments keep at most this many whitespace-delimited tokens.
inline constexpr std::size_t kMaxTextTokens = 8;

enum class AbstractType { Select, Filter, Relate, Verify, Query, Choose, Exist, And, Or, Compare };
enum class ArgKind { Ref, Text };
enum class ResultKind { Objects, Boolean, Answer };

std::string_view to_string(AbstractType t);
std::string_view to_string(ResultKind k);

struct FunctionSpec {
    AbstractType abstract_type;
    std::string_view subtype;
    std::vector<ArgKind> arg_kinds;
    ResultKind result_kind;

    std::size_t arity() const { return arg_kinds.size(); }
    /// Input kind expected for a Ref argument: Boolean for and/or, Objects otherwise.
    ResultKind ref_input_kind() const;
};

/// The full function catalog, in a fixed order.
std::span<const FunctionSpec> function_catalog();
/// nullptr when the subtype is unknown.
const FunctionSpec* find_function(std::string_view subtype);

struct ProgramNode {
    std::size_t index = 0;
    const FunctionSpec* spec = nullptr;
    // Arguments in source order; each slot holds either a ref or a text value
    // according to spec->arg_kinds.
    std::vector<std::string> text_args;
    std::vector<std::size_t> ref_args;

    bool operator==(const ProgramNode& o) const {
        return index == o.index && spec == o.spec && text_args == o.text_args && ref_args == o.ref_args;
    }
};

class ProgramTree {
public:
    ProgramTree() = default;

    const std::vector<ProgramNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t root() const { return root_; }
    const ProgramNode& node(std::size_t i) const { return nodes_.at(i); }
    const ProgramNode& root_node() const { return nodes_.at(root_); }
    /// Non-fatal diagnostics raised while parsing (e.g. text truncation).
    const std::vector<std::string>& warnings() const { return warnings_; }

    bool operator==(const ProgramTree& o) const { return nodes_ == o.nodes_ && root_ == o.root_; }

private:
    friend ProgramTree parse_program(std::string_view src);
    std::vector<ProgramNode> nodes_;
    std::size_t root_ = 0;
    std::vector<std::string> warnings_;
};

enum class ProgramErrorKind {
    SyntaxError,
    UnknownFunction,
    ArityError,
    ForwardRefError,
    TooManyNodes,
    MultipleRoots,
};

std::string_view to_string(ProgramErrorKind k);

class ProgramError : public std::runtime_error {
public:
    ProgramError(ProgramErrorKind kind, std::size_t position, const std::string& what);
    ProgramErrorKind kind() const { return kind_; }
    /// Byte offset into the source where the problem was detected.
    std::size_t position() const { return position_; }

private:
    ProgramErrorKind kind_;
    std::size_t position_;
};

/// Parses `subtype(arg,...);subtype(arg,...)` into a validated tree.
/// Input is lowercased; text arguments are trimmed, internal whitespace
/// collapsed, and truncated to kMaxTextTokens tokens (with a warning).
ProgramTree parse_program(std::string_view src);

/// Canonical rendering: no whitespace around punctuation, lowercase.
std::string render_program(const ProgramTree& tree);
std::string render_node(const ProgramNode& node);

/// Length of the longest dependency chain; 1 for a single node.
std::size_t tree_depth(const ProgramTree& tree);

/// Layer i holds the nodes whose refs all lie in earlier layers, in index order.
std::vector<std::vector<std::size_t>> topological_layers(const ProgramTree& tree);

/// Lowercase, trim, collapse internal whitespace runs to a single space.
std::string normalize_text(std::string_view s);

}  // namespace gqa
