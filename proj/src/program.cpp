#include "gqa/program.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>

namespace gqa {

namespace {

using enum ArgKind;
using AT = AbstractType;
using RK = ResultKind;

const std::vector<FunctionSpec>& catalog_storage() {
    static const std::vector<FunctionSpec> specs = {
        {AT::Select, "select", {Text}, RK::Objects},

        {AT::Filter, "filter_attr", {Ref, Text}, RK::Objects},
        {AT::Filter, "filter_not_attr", {Ref, Text}, RK::Objects},
        {AT::Filter, "filter_name", {Ref, Text}, RK::Objects},

        {AT::Relate, "relate", {Ref, Text}, RK::Objects},
        {AT::Relate, "relate_inv", {Ref, Text}, RK::Objects},
        {AT::Relate, "relate_name", {Ref, Text, Text}, RK::Objects},
        {AT::Relate, "relate_inv_name", {Ref, Text, Text}, RK::Objects},
        {AT::Relate, "relate_attr", {Ref, Text, Text}, RK::Objects},

        {AT::Verify, "verify_attr", {Ref, Text}, RK::Boolean},
        {AT::Verify, "verify_rel", {Ref, Text, Text}, RK::Boolean},

        {AT::Exist, "exist", {Ref}, RK::Boolean},
        {AT::And, "and", {Ref, Ref}, RK::Boolean},
        {AT::Or, "or", {Ref, Ref}, RK::Boolean},

        {AT::Query, "query_name", {Ref}, RK::Answer},
        {AT::Query, "query_attr", {Ref, Text}, RK::Answer},

        {AT::Choose, "choose_attr", {Ref, Text, Text, Text}, RK::Answer},
        {AT::Choose, "choose_name", {Ref, Text, Text}, RK::Answer},

        {AT::Compare, "compare_same", {Ref, Ref, Text}, RK::Boolean},
        {AT::Compare, "compare_diff", {Ref, Ref, Text}, RK::Boolean},
        {AT::Compare, "compare_common", {Ref, Ref}, RK::Answer},
    };
    return specs;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }
bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }
bool is_text_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || is_space(c); }

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src.size(), '\0') {
        std::transform(src.begin(), src.end(), src_.begin(), ascii_lower);
    }

    struct RawArg {
        bool is_ref = false;
        std::size_t ref = 0;
        std::string text;
        std::size_t pos = 0;
    };

    struct RawStmt {
        std::size_t pos = 0;
        const FunctionSpec* spec = nullptr;
        std::vector<RawArg> args;
    };

    std::vector<RawStmt> parse_all() {
        skip_ws();
        if (at_end()) fail(ProgramErrorKind::SyntaxError, "empty program");
        std::vector<RawStmt> stmts;
        while (true) {
            if (stmts.size() == kMaxProgramNodes) {
                fail(ProgramErrorKind::TooManyNodes,
                     "program has more than " + std::to_string(kMaxProgramNodes) + " nodes");
            }
            stmts.push_back(parse_stmt(stmts.size()));
            skip_ws();
            if (at_end()) break;
            expect(';');
            skip_ws();
        }
        return stmts;
    }

    [[noreturn]] void fail(ProgramErrorKind kind, const std::string& msg) const { fail_at(kind, pos_, msg); }

    [[noreturn]] static void fail_at(ProgramErrorKind kind, std::size_t pos, const std::string& msg) {
        throw ProgramError(kind, pos, msg);
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek() const { return at_end() ? '\0' : src_[pos_]; }

    void skip_ws() {
        while (!at_end() && is_space(src_[pos_])) ++pos_;
    }

    void expect(char c) {
        if (peek() != c) {
            std::string got = at_end() ? "end of input" : std::string("'") + describe(peek()) + "'";
            fail(ProgramErrorKind::SyntaxError, std::string("expected '") + c + "', got " + got);
        }
        ++pos_;
    }

    static std::string describe(char c) {
        auto u = static_cast<unsigned char>(c);
        if (u >= 0x20 && u < 0x7f) return std::string(1, c);
        std::ostringstream os;
        os << "\\x" << std::hex << static_cast<int>(u);
        return os.str();
    }

    RawStmt parse_stmt(std::size_t index) {
        RawStmt stmt;
        stmt.pos = pos_;
        std::size_t start = pos_;
        while (!at_end() && is_ident_char(src_[pos_])) ++pos_;
        if (start == pos_) fail(ProgramErrorKind::SyntaxError, "expected function name");
        std::string_view name(src_.data() + start, pos_ - start);
        stmt.spec = find_function(name);
        if (stmt.spec == nullptr) {
            fail_at(ProgramErrorKind::UnknownFunction, start, "unknown function '" + std::string(name) + "'");
        }
        skip_ws();
        expect('(');
        while (true) {
            stmt.args.push_back(parse_arg(index));
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect(')');
            break;
        }
        return stmt;
    }

    RawArg parse_arg(std::size_t index) {
        skip_ws();
        RawArg arg;
        arg.pos = pos_;
        if (peek() == '[') {
            ++pos_;
            std::size_t start = pos_;
            while (!at_end() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
            if (start == pos_) fail(ProgramErrorKind::SyntaxError, "expected node index");
            auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, arg.ref);
            if (ec != std::errc{}) fail_at(ProgramErrorKind::SyntaxError, start, "node index out of range");
            expect(']');
            skip_ws();
            arg.is_ref = true;
            if (arg.ref >= index) {
                fail_at(ProgramErrorKind::ForwardRefError, arg.pos,
                        "reference [" + std::to_string(arg.ref) + "] does not precede node " + std::to_string(index));
            }
            return arg;
        }
        std::size_t start = pos_;
        while (!at_end() && is_text_char(src_[pos_])) ++pos_;
        arg.text = normalize_text(std::string_view(src_).substr(start, pos_ - start));
        if (arg.text.empty()) fail(ProgramErrorKind::SyntaxError, "empty argument");
        return arg;
    }

    std::string src_;
    std::size_t pos_ = 0;
};

std::string truncate_tokens(const std::string& text, std::size_t max_tokens, bool& truncated) {
    std::size_t tokens = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == ' ' && ++tokens > max_tokens) {
            truncated = true;
            return text.substr(0, i);
        }
    }
    truncated = false;
    return text;
}

}  // namespace

std::string_view to_string(AbstractType t) {
    static constexpr std::array names = {"select", "filter", "relate", "verify", "query",
                                         "choose", "exist",  "and",    "or",     "compare"};
    return names[static_cast<std::size_t>(t)];
}

std::string_view to_string(ResultKind k) {
    switch (k) {
        case ResultKind::Objects: return "objects";
        case ResultKind::Boolean: return "bool";
        case ResultKind::Answer: return "answer";
    }
    return "?";
}

std::string_view to_string(ProgramErrorKind k) {
    switch (k) {
        case ProgramErrorKind::SyntaxError: return "SyntaxError";
        case ProgramErrorKind::UnknownFunction: return "UnknownFunction";
        case ProgramErrorKind::ArityError: return "ArityError";
        case ProgramErrorKind::ForwardRefError: return "ForwardRefError";
        case ProgramErrorKind::TooManyNodes: return "TooManyNodes";
        case ProgramErrorKind::MultipleRoots: return "MultipleRoots";
    }
    return "?";
}

ResultKind FunctionSpec::ref_input_kind() const {
    return (abstract_type == AbstractType::And || abstract_type == AbstractType::Or) ? ResultKind::Boolean
                                                                                     : ResultKind::Objects;
}

std::span<const FunctionSpec> function_catalog() { return catalog_storage(); }

const FunctionSpec* find_function(std::string_view subtype) {
    for (const auto& spec : catalog_storage()) {
        if (spec.subtype == subtype) return &spec;
    }
    return nullptr;
}

ProgramError::ProgramError(ProgramErrorKind kind, std::size_t position, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " at " + std::to_string(position) + ": " + what),
      kind_(kind),
      position_(position) {}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ascii_lower(c));
    }
    return out;
}

ProgramTree parse_program(std::string_view src) {
    Parser parser(src);
    auto stmts = parser.parse_all();

    ProgramTree tree;
    std::vector<bool> referenced(stmts.size(), false);
    for (std::size_t i = 0; i < stmts.size(); ++i) {
        const auto& stmt = stmts[i];
        const auto& kinds = stmt.spec->arg_kinds;
        if (stmt.args.size() != kinds.size()) {
            Parser::fail_at(ProgramErrorKind::ArityError, stmt.pos,
                            std::string(stmt.spec->subtype) + " expects " + std::to_string(kinds.size()) +
                                " arguments, got " + std::to_string(stmt.args.size()));
        }
        ProgramNode node;
        node.index = i;
        node.spec = stmt.spec;
        for (std::size_t a = 0; a < kinds.size(); ++a) {
            const auto& arg = stmt.args[a];
            bool want_ref = kinds[a] == ArgKind::Ref;
            if (arg.is_ref != want_ref) {
                Parser::fail_at(ProgramErrorKind::ArityError, arg.pos,
                                std::string(stmt.spec->subtype) + " argument " + std::to_string(a + 1) +
                                    (want_ref ? " must be a node reference" : " must be text"));
            }
            if (arg.is_ref) {
                node.ref_args.push_back(arg.ref);
                referenced[arg.ref] = true;
            } else {
                bool truncated = false;
                node.text_args.push_back(truncate_tokens(arg.text, kMaxTextTokens, truncated));
                if (truncated) {
                    tree.warnings_.push_back("node " + std::to_string(i) + ": argument truncated to " +
                                             std::to_string(kMaxTextTokens) + " tokens");
                }
            }
        }
        tree.nodes_.push_back(std::move(node));
    }

    for (std::size_t i = 0; i + 1 < stmts.size(); ++i) {
        if (!referenced[i]) {
            Parser::fail_at(ProgramErrorKind::MultipleRoots, stmts[i].pos,
                            "node " + std::to_string(i) + " is never referenced");
        }
    }
    tree.root_ = stmts.size() - 1;
    return tree;
}

std::string render_node(const ProgramNode& node) {
    std::string out(node.spec->subtype);
    out.push_back('(');
    std::size_t r = 0, t = 0;
    for (std::size_t a = 0; a < node.spec->arg_kinds.size(); ++a) {
        if (a) out.push_back(',');
        if (node.spec->arg_kinds[a] == ArgKind::Ref) {
            out += "[" + std::to_string(node.ref_args[r++]) + "]";
        } else {
            out += node.text_args[t++];
        }
    }
    out.push_back(')');
    return out;
}

std::string render_program(const ProgramTree& tree) {
    std::string out;
    for (const auto& node : tree.nodes()) {
        if (!out.empty()) out.push_back(';');
        out += render_node(node);
    }
    return out;
}

namespace {
std::vector<std::size_t> node_levels(const ProgramTree& tree) {
    std::vector<std::size_t> level(tree.size(), 0);
    for (const auto& node : tree.nodes()) {
        for (auto ref : node.ref_args) level[node.index] = std::max(level[node.index], level[ref] + 1);
    }
    return level;
}
}  // namespace

std::size_t tree_depth(const ProgramTree& tree) {
    if (tree.size() == 0) return 0;
    auto level = node_levels(tree);
    return *std::max_element(level.begin(), level.end()) + 1;
}

std::vector<std::vector<std::size_t>> topological_layers(const ProgramTree& tree) {
    std::vector<std::vector<std::size_t>> layers(tree_depth(tree));
    auto level = node_levels(tree);
    for (std::size_t i = 0; i < level.size(); ++i) layers[level[i]].push_back(i);
    return layers;
}

}  // namespace gqa
