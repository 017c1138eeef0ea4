#include "gqa/executor.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gqa {

using nlohmann::json;

ResultKind kind_of(const StepResult& r) {
    switch (r.index()) {
        case 0: return ResultKind::Objects;
        case 1: return ResultKind::Boolean;
        default: return ResultKind::Answer;
    }
}

std::string describe(const StepResult& r) {
    std::ostringstream os;
    if (const auto* objs = std::get_if<ObjectsResult>(&r)) {
        os << "objects{";
        for (std::size_t i = 0; i < objs->items.size(); ++i) {
            const auto& it = objs->items[i];
            if (i) os << ", ";
            os << it.id << ":" << it.name << "(" << it.bbox.x1 << "," << it.bbox.y1 << "," << it.bbox.x2 << ","
               << it.bbox.y2 << ")";
        }
        os << "}";
    } else if (const auto* b = std::get_if<BooleanResult>(&r)) {
        os << (b->value ? "true" : "false");
    } else {
        os << "answer \"" << std::get<AnswerResult>(r).value << "\"";
    }
    return os.str();
}

AttributeOntology::AttributeOntology(std::map<std::string, std::set<std::string>> categories) {
    for (auto& [cat, attrs] : categories) {
        std::set<std::string> norm;
        for (const auto& a : attrs) norm.insert(normalize_text(a));
        categories_.emplace(normalize_text(cat), std::move(norm));
    }
}

const AttributeOntology& AttributeOntology::builtin() {
    static const AttributeOntology table({
        {"color", {"black", "blue", "brown", "gold", "gray", "green", "orange", "pink", "purple", "red", "silver",
                   "tan", "white", "yellow", "beige", "dark", "light"}},
        {"material", {"metal", "wood", "wooden", "plastic", "glass", "leather", "cloth", "stone", "brick",
                      "concrete", "paper", "ceramic", "rubber", "cotton"}},
        {"shape", {"round", "square", "rectangular", "triangular", "oval", "circular"}},
        {"size", {"large", "small", "big", "little", "tiny", "huge", "giant"}},
        {"length", {"long", "short"}},
        {"height", {"tall", "short"}},
        {"pattern", {"striped", "checkered", "spotted", "plaid", "floral", "dotted"}},
        {"pose", {"standing", "sitting", "walking", "lying", "running", "jumping"}},
        {"activity", {"eating", "playing", "drinking", "reading", "sleeping", "talking"}},
        {"state", {"open", "closed", "empty", "full", "on", "off"}},
        {"cleanliness", {"clean", "dirty"}},
        {"weather", {"sunny", "cloudy", "rainy", "overcast", "clear"}},
        {"age", {"old", "young", "new"}},
    });
    return table;
}

AttributeOntology AttributeOntology::from_json(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("attribute categories: expected an object");
    std::map<std::string, std::set<std::string>> cats;
    for (const auto& [cat, attrs] : doc.items()) {
        if (!attrs.is_array()) throw std::invalid_argument("attribute categories: '" + cat + "' is not an array");
        auto& set = cats[cat];
        for (const auto& a : attrs) set.insert(a.get<std::string>());
    }
    return AttributeOntology(std::move(cats));
}

AttributeOntology AttributeOntology::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return from_json(json::parse(in));
}

bool AttributeOntology::has_category(std::string_view category) const {
    return categories_.find(category) != categories_.end();
}

bool AttributeOntology::in_category(std::string_view category, std::string_view attribute) const {
    auto it = categories_.find(category);
    return it != categories_.end() && it->second.count(std::string(attribute)) > 0;
}

std::string_view to_string(ExecErrorKind k) {
    switch (k) {
        case ExecErrorKind::RuleTypeMismatch: return "RuleTypeMismatch";
        case ExecErrorKind::UnknownPredicateCategory: return "UnknownPredicateCategory";
        case ExecErrorKind::EmptyInputToQuery: return "EmptyInputToQuery";
        case ExecErrorKind::MissingAttribute: return "MissingAttribute";
        case ExecErrorKind::MissingAnnotation: return "MissingAnnotation";
    }
    return "?";
}

ExecError::ExecError(ExecErrorKind kind, const std::string& what, std::optional<std::size_t> node)
    : std::runtime_error(std::string(to_string(kind)) + (node ? " at node " + std::to_string(*node) : "") + ": " +
                         what),
      kind_(kind),
      detail_(what),
      node_(node) {}

std::optional<std::string> answer_of(const StepResult& r) {
    if (const auto* b = std::get_if<BooleanResult>(&r)) return std::string(b->value ? "yes" : "no");
    if (const auto* a = std::get_if<AnswerResult>(&r)) return a->value;
    return std::nullopt;
}

namespace {

class RuleContext {
public:
    RuleContext(const FunctionSpec& spec, const std::vector<StepResult>& inputs, const std::vector<std::string>& text,
                const SceneGraph& g, const ExecOptions& opts, std::vector<std::string>* warnings)
        : spec_(spec), inputs_(inputs), text_(text), g_(g), opts_(opts), warnings_(warnings) {
        std::size_t refs = std::count(spec.arg_kinds.begin(), spec.arg_kinds.end(), ArgKind::Ref);
        if (inputs.size() != refs || text.size() != spec.arity() - refs) {
            throw ExecError(ExecErrorKind::RuleTypeMismatch,
                            std::string(spec.subtype) + ": argument count does not match its signature");
        }
        auto want = spec.ref_input_kind();
        for (const auto& in : inputs) {
            if (kind_of(in) != want) {
                throw ExecError(ExecErrorKind::RuleTypeMismatch, std::string(spec.subtype) + " expects " +
                                                                     std::string(to_string(want)) + " input, got " +
                                                                     std::string(to_string(kind_of(in))));
            }
        }
    }

    ObjectSet ids(std::size_t i) const {
        ObjectSet out;
        for (const auto& item : std::get<ObjectsResult>(inputs_[i]).items) out.push_back(item.id);
        std::sort(out.begin(), out.end());
        return out;
    }
    bool flag(std::size_t i) const { return std::get<BooleanResult>(inputs_[i]).value; }
    const std::string& text(std::size_t i) const { return text_[i]; }

    StepResult objects(const ObjectSet& set) const {
        if (opts_.strict && set.empty() &&
            (spec_.abstract_type == AbstractType::Select || spec_.abstract_type == AbstractType::Relate)) {
            throw ExecError(ExecErrorKind::MissingAnnotation,
                            std::string(spec_.subtype) + " found no annotated objects");
        }
        ObjectsResult r;
        for (const auto& id : set) {
            const auto& o = g_.at(id);
            r.items.push_back({o.id, o.name, o.bbox});
        }
        return r;
    }

    ObjectSet keep(const ObjectSet& set, auto&& pred) const {
        ObjectSet out;
        for (const auto& id : set) {
            if (pred(g_.at(id))) out.push_back(id);
        }
        return out;
    }

    void require_category(const std::string& category) const {
        if (!opts_.ontology->has_category(category)) {
            throw ExecError(ExecErrorKind::UnknownPredicateCategory, "unknown attribute category '" + category + "'");
        }
    }

    /// First object of a non-empty input set, warning if the choice was ambiguous.
    const SGObject& first(std::size_t i) const {
        auto set = ids(i);
        if (set.empty()) {
            throw ExecError(ExecErrorKind::EmptyInputToQuery,
                            std::string(spec_.subtype) + " applied to an empty object set");
        }
        if (set.size() > 1 && warnings_) {
            warnings_->push_back(std::string(spec_.subtype) + ": " + std::to_string(set.size()) +
                                 " candidate objects, using " + set.front());
        }
        return g_.at(set.front());
    }

    std::optional<std::string> value_in_category(const SGObject& o, const std::string& category) const {
        for (const auto& a : o.attributes) {
            if (opts_.ontology->in_category(category, a)) return a;
        }
        return std::nullopt;
    }

    std::string require_value(const SGObject& o, const std::string& category) const {
        auto v = value_in_category(o, category);
        if (!v) {
            throw ExecError(ExecErrorKind::MissingAttribute,
                            "object " + o.id + " has no attribute in category '" + category + "'");
        }
        return *v;
    }

    const SceneGraph& graph() const { return g_; }

private:
    const FunctionSpec& spec_;
    const std::vector<StepResult>& inputs_;
    const std::vector<std::string>& text_;
    const SceneGraph& g_;
    const ExecOptions& opts_;
    std::vector<std::string>* warnings_;
};

ObjectSet with_name(const SceneGraph& g, const ObjectSet& set, const std::string& name) {
    ObjectSet out;
    for (const auto& id : set) {
        if (g.at(id).name == name) out.push_back(id);
    }
    return out;
}

}  // namespace

StepResult eval_node(const FunctionSpec& spec, const std::vector<StepResult>& inputs,
                     const std::vector<std::string>& text_args, const SceneGraph& g, const ExecOptions& opts,
                     std::vector<std::string>* warnings) {
    RuleContext ctx(spec, inputs, text_args, g, opts, warnings);
    const std::string_view fn = spec.subtype;

    if (fn == "select") return ctx.objects(g.objects_by_name(ctx.text(0)));

    if (fn == "filter_attr") {
        return ctx.objects(ctx.keep(ctx.ids(0), [&](const SGObject& o) { return o.has_attribute(ctx.text(0)); }));
    }
    if (fn == "filter_not_attr") {
        return ctx.objects(ctx.keep(ctx.ids(0), [&](const SGObject& o) { return !o.has_attribute(ctx.text(0)); }));
    }
    if (fn == "filter_name") {
        return ctx.objects(ctx.keep(ctx.ids(0), [&](const SGObject& o) { return o.name == ctx.text(0); }));
    }

    if (fn == "relate") return ctx.objects(g.related(ctx.ids(0), ctx.text(0), Direction::Forward));
    if (fn == "relate_inv") return ctx.objects(g.related(ctx.ids(0), ctx.text(0), Direction::Inverse));
    if (fn == "relate_name") {
        return ctx.objects(with_name(g, g.related(ctx.ids(0), ctx.text(0), Direction::Forward), ctx.text(1)));
    }
    if (fn == "relate_inv_name") {
        return ctx.objects(with_name(g, g.related(ctx.ids(0), ctx.text(0), Direction::Inverse), ctx.text(1)));
    }
    if (fn == "relate_attr") {
        auto rel = g.related(ctx.ids(0), ctx.text(0), Direction::Forward);
        return ctx.objects(ctx.keep(rel, [&](const SGObject& o) { return o.has_attribute(ctx.text(1)); }));
    }

    if (fn == "verify_attr") {
        auto set = ctx.ids(0);
        return BooleanResult{std::any_of(set.begin(), set.end(),
                                         [&](const std::string& id) { return g.at(id).has_attribute(ctx.text(0)); })};
    }
    if (fn == "verify_rel") {
        return BooleanResult{!with_name(g, g.related(ctx.ids(0), ctx.text(0), Direction::Forward), ctx.text(1)).empty()};
    }
    if (fn == "exist") return BooleanResult{!ctx.ids(0).empty()};
    if (fn == "and") return BooleanResult{ctx.flag(0) && ctx.flag(1)};
    if (fn == "or") return BooleanResult{ctx.flag(0) || ctx.flag(1)};

    if (fn == "query_name") return AnswerResult{ctx.first(0).name};
    if (fn == "query_attr") {
        ctx.require_category(ctx.text(0));
        return AnswerResult{ctx.require_value(ctx.first(0), ctx.text(0))};
    }
    if (fn == "choose_attr") {
        ctx.require_category(ctx.text(0));
        const auto& o = ctx.first(0);
        return AnswerResult{o.has_attribute(ctx.text(1)) ? ctx.text(1) : ctx.text(2)};
    }
    if (fn == "choose_name") {
        auto set = ctx.ids(0);
        if (set.empty()) {
            throw ExecError(ExecErrorKind::EmptyInputToQuery, "choose_name applied to an empty object set");
        }
        bool named = !with_name(g, set, ctx.text(0)).empty();
        return AnswerResult{named ? ctx.text(0) : ctx.text(1)};
    }
    if (fn == "compare_same" || fn == "compare_diff") {
        ctx.require_category(ctx.text(0));
        const auto& a = ctx.first(0);
        const auto& b = ctx.first(1);
        bool same = ctx.require_value(a, ctx.text(0)) == ctx.require_value(b, ctx.text(0));
        return BooleanResult{fn == "compare_same" ? same : !same};
    }
    if (fn == "compare_common") {
        const auto& a = ctx.first(0);
        const auto& b = ctx.first(1);
        for (const auto& attr : a.attributes) {
            if (b.attributes.count(attr)) return AnswerResult{attr};
        }
        throw ExecError(ExecErrorKind::MissingAttribute, "objects " + a.id + " and " + b.id + " share no attribute");
    }

    throw ExecError(ExecErrorKind::RuleTypeMismatch, "no rule for " + std::string(fn));
}

ExecutionTrace execute(const ProgramTree& tree, const SceneGraph& g, const ExecOptions& opts) {
    ExecutionTrace trace;
    trace.image_id = g.image_id();
    std::vector<std::optional<StepResult>> results(tree.size());
    for (const auto& layer : topological_layers(tree)) {
        for (auto idx : layer) {
            const auto& node = tree.node(idx);
            std::vector<StepResult> inputs;
            inputs.reserve(node.ref_args.size());
            for (auto ref : node.ref_args) inputs.push_back(*results[ref]);
            std::vector<std::string> notes;
            try {
                results[idx] = eval_node(*node.spec, inputs, node.text_args, g, opts, &notes);
            } catch (const ExecError& e) {
                if (e.node()) throw;
                throw ExecError(e.kind(), render_node(node) + ": " + e.detail(), idx);
            }
            for (auto& n : notes) trace.warnings.push_back("node " + std::to_string(idx) + ": " + n);
        }
    }
    trace.per_node.reserve(results.size());
    for (auto& r : results) trace.per_node.push_back(std::move(*r));
    if (!trace.per_node.empty()) trace.final_answer = answer_of(trace.per_node[tree.root()]);
    return trace;
}

json trace_to_json(const ExecutionTrace& trace) {
    json steps = json::array();
    for (const auto& r : trace.per_node) {
        if (const auto* objs = std::get_if<ObjectsResult>(&r)) {
            json items = json::array();
            for (const auto& it : objs->items) {
                items.push_back({{"id", it.id}, {"bbox", {it.bbox.x1, it.bbox.y1, it.bbox.x2, it.bbox.y2}}});
            }
            steps.push_back({{"tag", "objects"}, {"items", std::move(items)}});
        } else if (const auto* b = std::get_if<BooleanResult>(&r)) {
            steps.push_back({{"tag", "bool"}, {"value", b->value}});
        } else {
            steps.push_back({{"tag", "answer"}, {"value", std::get<AnswerResult>(r).value}});
        }
    }
    json out = {{"qid", trace.question_id}, {"image", trace.image_id}, {"steps", std::move(steps)}};
    out["answer"] = trace.final_answer ? json(*trace.final_answer) : json(nullptr);
    return out;
}

}  // namespace gqa
