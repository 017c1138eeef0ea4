#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gqa {

enum class QuestionClass { Binary, Open };

struct PredictionRecord {
    std::string qid;
    std::string predicted;
    std::string gold;
    QuestionClass q_class = QuestionClass::Open;
    std::optional<std::string> parent_qid;
};

/// Binary when the gold answer is yes/no or the program root is a choose_* subtype.
QuestionClass classify_question(std::string_view gold, std::string_view root_subtype = {});

/// Lowercase, trim and collapse whitespace before exact-match comparison.
std::string normalize_answer(std::string_view s);
bool is_correct(const PredictionRecord& r);

enum class MetricsErrorKind { EmptyInput, DanglingParent, DuplicateQid, SelfParent, BadK, MalformedRecord };

std::string_view to_string(MetricsErrorKind k);

class MetricsError : public std::runtime_error {
public:
    MetricsError(MetricsErrorKind kind, const std::string& what, std::size_t line = 0);
    MetricsErrorKind kind() const { return kind_; }
    /// 1-based input line for MalformedRecord, else 0.
    std::size_t line() const { return line_; }

private:
    MetricsErrorKind kind_;
    std::size_t line_;
};

struct Accuracy {
    double acc = 0;
    std::optional<double> binary_acc;
    std::optional<double> open_acc;
};

/// Throws EmptyInput on an empty list. Per-class values are absent for empty classes.
Accuracy accuracy(const std::vector<PredictionRecord>& records);

/// Numerator/denominator pair; sum-decomposable across shards.
struct RcCounts {
    std::size_t consistent = 0;  ///< parent and all of its sub-questions correct
    std::size_t parents = 0;     ///< parent correct

    std::optional<double> value() const {
        if (parents == 0) return std::nullopt;
        return static_cast<double>(consistent) / static_cast<double>(parents);
    }
    RcCounts& operator+=(const RcCounts& o) {
        consistent += o.consistent;
        parents += o.parents;
        return *this;
    }
};

/// Checks qid uniqueness and parent links (DuplicateQid, SelfParent, DanglingParent).
void validate_links(const std::vector<PredictionRecord>& records);

RcCounts rc_counts(const std::vector<PredictionRecord>& records, std::size_t k);
/// Reasoning consistency over parents with at least k sub-questions; absent when no such parent is correct.
std::optional<double> rc_k(const std::vector<PredictionRecord>& records, std::size_t k);

struct ConsistencyReport {
    std::size_t total = 0;
    std::optional<double> acc;  ///< over records without a parent
    std::optional<double> acc_sub;
    std::optional<double> binary_acc;
    std::optional<double> open_acc;
    std::map<std::size_t, std::optional<double>> rc;
};

ConsistencyReport consistency_report(const std::vector<PredictionRecord>& records, std::size_t k_max = 3);

/// Missing fractions are written as "n/a".
nlohmann::json report_to_json(const ConsistencyReport& report);
std::string report_table(const ConsistencyReport& report);

/// JSONL {"qid", "predicted", "gold", "class"?, "parent"?}. Throws MalformedRecord with the line number.
std::vector<PredictionRecord> read_predictions(std::istream& in);

}  // namespace gqa
