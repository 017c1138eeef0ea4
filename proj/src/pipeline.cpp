#include "gqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "gqa/metrics.hpp"
#include "gqa/program.hpp"

namespace gqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<QuestionSpec> read_questions(std::istream& in) {
    std::vector<QuestionSpec> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (normalize_text(line).empty()) continue;
        auto where = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(where + ": " + e.what());
        }
        if (!j.is_object()) throw InputError(where + ": not a JSON object");
        auto field = [&](const char* key) -> std::optional<std::string> {
            auto it = j.find(key);
            if (it == j.end() || it->is_null()) return std::nullopt;
            if (!it->is_string()) throw InputError(where + ": '" + key + "' is not a string");
            return it->get<std::string>();
        };
        QuestionSpec q;
        auto qid = field("qid");
        auto image = field("image");
        auto program = field("program");
        if (!qid || !image || !program) throw InputError(where + ": requires qid, image and program");
        q.qid = *qid;
        q.image = *image;
        q.program = *program;
        if (auto gold = field("answer")) q.gold = normalize_text(*gold);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<QuestionSpec> load_questions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return read_questions(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::uint64_t step_seed(std::uint64_t run_seed, const std::string& qid, std::size_t step) {
    // FNV-1a over the qid, folded with splitmix64.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : qid) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = run_seed ^ h ^ (0x9e3779b97f4a7c15ULL * (step + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string CompileSummary::to_text() const {
    std::ostringstream os;
    os << "questions: " << total << "  compiled: " << compiled << "  skipped: " << skipped << '\n';
    for (const auto& [reason, n] : skip_reasons) os << "  skipped " << std::left << std::setw(26) << reason << n << '\n';
    if (answer_mismatches) os << "answer mismatches vs. annotation: " << answer_mismatches << '\n';
    os << "sequences: " << sequences << "  tokens: " << tokens;
    if (sequences) {
        os << "  length min/mean/max: " << min_len << '/' << std::fixed << std::setprecision(2)
           << static_cast<double>(tokens) / static_cast<double>(sequences) << '/' << max_len;
    }
    os << '\n';
    return os.str();
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

struct Outcome {
    std::optional<ProgramTree> tree;
    std::optional<ExecutionTrace> trace;
    std::string skip_reason;
    std::string diagnostic;
    std::vector<std::string> warnings;
    std::string line;
    std::vector<std::size_t> lengths;
};

void execute_one(const QuestionSpec& q, const SceneGraphStore& store, const ExecOptions& exec, Outcome& out) {
    try {
        out.tree = parse_program(q.program);
        for (const auto& w : out.tree->warnings()) out.warnings.push_back(q.qid + ": " + w);
    } catch (const ProgramError& e) {
        out.skip_reason = std::string(to_string(e.kind()));
        out.diagnostic = q.qid + ": " + e.what();
        return;
    }
    auto g = store.find(q.image);
    if (g == store.end()) {
        out.skip_reason = "MissingImage";
        out.diagnostic = q.qid + ": no scene graph for image " + q.image;
        return;
    }
    try {
        auto trace = execute(*out.tree, g->second, exec);
        trace.question_id = q.qid;
        if (!trace.final_answer) {
            out.skip_reason = "NonAnswerRoot";
            out.diagnostic = q.qid + ": program root yields objects, not an answer";
            return;
        }
        for (const auto& w : trace.warnings) out.warnings.push_back(q.qid + ": " + w);
        out.trace = std::move(trace);
    } catch (const ExecError& e) {
        out.skip_reason = std::string(to_string(e.kind()));
        out.diagnostic = q.qid + ": " + e.what();
    }
}

void encode_one(const QuestionSpec& q, const SupervisionCodec& codec, const SceneGraph& g, Outcome& out) {
    const auto& cfg = codec.config();
    ordered_json steps = ordered_json::array();
    try {
        for (std::size_t i = 0; i < out.trace->per_node.size(); ++i) {
            auto seq = codec.encode(out.trace->per_node[i], {g.width(), g.height()}, step_seed(cfg.seed, q.qid, i));
            out.lengths.push_back(seq.size());
            steps.push_back(seq.token_ids);
        }
    } catch (const CodecError& e) {
        out.skip_reason = std::string(to_string(e.kind()));
        out.diagnostic = q.qid + ": " + e.what();
        out.lengths.clear();
        return;
    }
    ordered_json line;
    line["qid"] = q.qid;
    line["image"] = q.image;
    line["program"] = render_program(*out.tree);
    line["answer"] = *out.trace->final_answer;
    line["steps"] = std::move(steps);
    line["cfg"] = {
        {"bins", cfg.bins},
        {"max_objects", cfg.max_objects},
        {"format", std::string(to_string(cfg.format))},
        {"shuffle_seed", cfg.shuffle ? ordered_json(cfg.seed) : ordered_json(nullptr)},
    };
    out.line = line.dump();
}

}  // namespace

CompiledCorpus compile_corpus(const std::vector<QuestionSpec>& questions, const SceneGraphStore& store,
                              CodecConfig codec_cfg, const CompileOptions& opts) {
    std::vector<std::size_t> order(questions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return questions[a].qid < questions[b].qid; });

    std::vector<Outcome> outcomes(order.size());
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (questions[order[i]].qid == questions[order[i - 1]].qid) {
            outcomes[i].skip_reason = "DuplicateQid";
            outcomes[i].diagnostic = questions[order[i]].qid + ": duplicate question id";
        }
    }

    parallel_for(order.size(), opts.workers, [&](std::size_t i) {
        if (outcomes[i].skip_reason.empty()) execute_one(questions[order[i]], store, opts.exec, outcomes[i]);
    });

    auto fail_strict = [&] {
        if (!opts.strict) return;
        for (const auto& o : outcomes) {
            if (!o.skip_reason.empty()) throw InputError("strict mode: " + o.diagnostic);
        }
    };
    fail_strict();

    CompiledCorpus corpus;
    if (codec_cfg.answer_vocab.empty()) {
        std::set<std::string> answers;
        for (const auto& o : outcomes) {
            if (!o.trace) continue;
            for (const auto& r : o.trace->per_node) {
                if (const auto* a = std::get_if<AnswerResult>(&r)) answers.insert(a->value);
            }
        }
        codec_cfg.answer_vocab.assign(answers.begin(), answers.end());
    }
    if (codec_cfg.name_vocab.empty()) {
        std::set<std::string> names;
        for (const auto& [id, g] : store) {
            for (const auto& [oid, obj] : g.objects()) names.insert(obj.name);
        }
        codec_cfg.name_vocab.assign(names.begin(), names.end());
    }
    corpus.answer_vocab = codec_cfg.answer_vocab;
    corpus.name_vocab = codec_cfg.name_vocab;
    SupervisionCodec codec(std::move(codec_cfg));

    parallel_for(order.size(), opts.workers, [&](std::size_t i) {
        auto& o = outcomes[i];
        if (!o.trace) return;
        const auto& q = questions[order[i]];
        encode_one(q, codec, store.at(q.image), o);
    });
    fail_strict();

    auto& s = corpus.summary;
    s.total = questions.size();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        auto& o = outcomes[i];
        for (auto& w : o.warnings) s.diagnostics.push_back(std::move(w));
        if (!o.skip_reason.empty()) {
            ++s.skipped;
            ++s.skip_reasons[o.skip_reason];
            s.diagnostics.push_back(o.diagnostic);
            continue;
        }
        ++s.compiled;
        const auto& q = questions[order[i]];
        if (q.gold && *q.gold != *o.trace->final_answer) {
            ++s.answer_mismatches;
            s.diagnostics.push_back(q.qid + ": executed answer '" + *o.trace->final_answer + "' differs from '" +
                                    *q.gold + "'");
        }
        for (auto len : o.lengths) {
            s.min_len = s.sequences == 0 ? len : std::min(s.min_len, len);
            s.max_len = std::max(s.max_len, len);
            ++s.sequences;
            s.tokens += len;
        }
        corpus.lines.push_back(std::move(o.line));
    }
    return corpus;
}

namespace {

struct Inputs {
    SceneGraphStore store;
    std::vector<QuestionSpec> questions;
    AttributeOntology ontology;
    CodecConfig codec;
};

Inputs load_inputs(const RunConfig& cfg, std::ostream& err) {
    Inputs in;
    std::vector<std::string> warnings;
    try {
        in.store = load_scene_graphs(cfg.scene_graphs, &warnings);
    } catch (const SceneGraphError& e) {
        throw InputError(cfg.scene_graphs.string() + ": " + e.what());
    }
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    in.questions = load_questions(cfg.programs);
    try {
        in.ontology = cfg.categories.empty() ? AttributeOntology::builtin() : AttributeOntology::load(cfg.categories);
    } catch (const std::exception& e) {
        throw InputError(cfg.categories.string() + ": " + e.what());
    }
    in.codec = cfg.codec;
    try {
        if (!cfg.answer_vocab.empty()) in.codec.answer_vocab = load_vocab(cfg.answer_vocab);
        if (!cfg.name_vocab.empty()) in.codec.name_vocab = load_vocab(cfg.name_vocab);
        in.codec.validate();
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    if (cfg.workers < 1) throw InputError("--workers must be at least 1");
    return in;
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
    auto p = out;
    p += suffix;
    return p;
}

}  // namespace

int run_compile(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.out.empty()) throw InputError("--out is required");
        auto in = load_inputs(cfg, err);
        if (in.questions.empty()) err << "warning: " << cfg.programs.string() << " contains no questions\n";

        ExecOptions exec{&in.ontology, cfg.strict};
        auto corpus = compile_corpus(in.questions, in.store, in.codec, {exec, cfg.strict, cfg.workers});

        std::ofstream file(cfg.out, std::ios::binary);
        if (!file) throw InputError("cannot write " + cfg.out.string());
        for (const auto& line : corpus.lines) file << line << '\n';
        file.close();
        if (cfg.answer_vocab.empty()) save_vocab(sibling(cfg.out, ".answers.txt"), corpus.answer_vocab);
        if (cfg.name_vocab.empty()) save_vocab(sibling(cfg.out, ".names.txt"), corpus.name_vocab);

        for (const auto& d : corpus.summary.diagnostics) err << "note: " << d << '\n';
        out << corpus.summary.to_text();
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}

int run_eval(const std::filesystem::path& predictions, std::size_t k_max, const std::filesystem::path& report_path,
             std::ostream& out, std::ostream& err) {
    std::vector<PredictionRecord> records;
    try {
        std::ifstream in(predictions, std::ios::binary);
        if (!in) throw InputError("cannot open " + predictions.string());
        records = read_predictions(in);
        if (records.empty()) throw InputError(predictions.string() + " contains no records");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }

    ConsistencyReport report;
    try {
        report = consistency_report(records, k_max);
    } catch (const MetricsError& e) {
        err << "error: " << e.what() << '\n';
        bool link = e.kind() == MetricsErrorKind::DanglingParent || e.kind() == MetricsErrorKind::SelfParent;
        return link ? kExitLinkError : kExitInputError;
    }

    auto doc = report_to_json(report);
    if (!report_path.empty()) {
        std::ofstream file(report_path, std::ios::binary);
        if (!file) {
            err << "error: cannot write " << report_path.string() << '\n';
            return kExitInputError;
        }
        file << doc.dump(2) << '\n';
    }
    out << report_table(report);
    return kExitOk;
}

int run_inspect(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    Inputs in;
    try {
        in = load_inputs(cfg, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    auto q = std::find_if(in.questions.begin(), in.questions.end(),
                          [&](const QuestionSpec& s) { return s.qid == cfg.qid; });
    if (q == in.questions.end()) {
        err << "NotFound: question " << cfg.qid << '\n';
        return kExitNotFound;
    }
    auto g = in.store.find(q->image);
    if (g == in.store.end()) {
        err << "NotFound(image): " << q->image << " has no scene graph\n";
        return kExitNotFound;
    }

    ProgramTree tree;
    ExecutionTrace trace;
    try {
        tree = parse_program(q->program);
        trace = execute(tree, g->second, {&in.ontology, cfg.strict});
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }

    auto codec_cfg = in.codec;
    if (codec_cfg.answer_vocab.empty()) {
        std::set<std::string> answers;
        for (const auto& r : trace.per_node) {
            if (const auto* a = std::get_if<AnswerResult>(&r)) answers.insert(a->value);
        }
        codec_cfg.answer_vocab.assign(answers.begin(), answers.end());
    }
    if (codec_cfg.name_vocab.empty()) {
        std::set<std::string> names;
        for (const auto& [id, graph] : in.store) {
            for (const auto& [oid, obj] : graph.objects()) names.insert(obj.name);
        }
        codec_cfg.name_vocab.assign(names.begin(), names.end());
    }
    SupervisionCodec codec(codec_cfg);

    out << "question " << q->qid << "  image " << q->image << " (" << g->second.width() << "x" << g->second.height()
        << ")\n";
    out << "program  " << render_program(tree) << '\n';
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const auto& r = trace.per_node[i];
        out << "[" << i << "] " << render_node(tree.node(i)) << '\n';
        out << "    result: " << describe(r) << '\n';
        try {
            auto seq = codec.encode(r, {g->second.width(), g->second.height()}, step_seed(codec_cfg.seed, q->qid, i));
            out << "    ids:    ";
            for (std::size_t t = 0; t < seq.token_ids.size(); ++t) out << (t ? " " : "") << seq.token_ids[t];
            out << "\n    tokens: " << codec.render(seq.token_ids) << '\n';
        } catch (const CodecError& e) {
            out << "    tokens: <" << e.what() << ">\n";
        }
    }
    for (const auto& w : trace.warnings) out << "note: " << w << '\n';
    out << "answer: " << (trace.final_answer ? *trace.final_answer : "<none>") << '\n';
    return kExitOk;
}

}  // namespace gqa
