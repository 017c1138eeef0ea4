#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gqa/codec.hpp"
#include "gqa/executor.hpp"
#include "gqa/scene_graph.hpp"

namespace gqa {

enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitLinkError = 2, kExitNotFound = 3 };

/// One line of a programs file: {"qid", "image", "program", "answer"?}.
struct QuestionSpec {
    std::string qid;
    std::string image;
    std::string program;
    std::optional<std::string> gold;
};

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<QuestionSpec> read_questions(std::istream& in);
std::vector<QuestionSpec> load_questions(const std::filesystem::path& path);

struct RunConfig {
    std::filesystem::path scene_graphs;
    std::filesystem::path programs;
    std::filesystem::path out;
    std::filesystem::path answer_vocab;
    std::filesystem::path name_vocab;
    std::filesystem::path categories;
    CodecConfig codec;
    bool strict = false;
    std::size_t workers = 1;
    std::size_t k_max = 3;
    std::string qid;
};

/// Seed for one step's shuffle, derived from the run seed, question id and node index only.
std::uint64_t step_seed(std::uint64_t run_seed, const std::string& qid, std::size_t step);

struct CompileSummary {
    std::size_t total = 0;
    std::size_t compiled = 0;
    std::size_t skipped = 0;
    std::map<std::string, std::size_t> skip_reasons;
    std::size_t answer_mismatches = 0;
    std::size_t sequences = 0;
    std::size_t tokens = 0;
    std::size_t min_len = 0;
    std::size_t max_len = 0;
    std::vector<std::string> diagnostics;

    std::string to_text() const;
};

struct CompiledCorpus {
    /// One serialized JSON line per compiled question, ordered by qid.
    std::vector<std::string> lines;
    std::vector<std::string> answer_vocab;
    std::vector<std::string> name_vocab;
    CompileSummary summary;
};

struct CompileOptions {
    ExecOptions exec;
    bool strict = false;
    std::size_t workers = 1;
};

/// Parses, executes and encodes every question. Output is independent of
/// `opts.workers`. When the codec vocabularies are empty they are derived:
/// answers from the executed traces, names from every object in `store`.
/// In strict mode the first failure (in qid order) throws InputError.
CompiledCorpus compile_corpus(const std::vector<QuestionSpec>& questions, const SceneGraphStore& store,
                              CodecConfig codec, const CompileOptions& opts);

int run_compile(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_eval(const std::filesystem::path& predictions, std::size_t k_max, const std::filesystem::path& report_path,
             std::ostream& out, std::ostream& err);
int run_inspect(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace gqa
