#include "gqa/metrics.hpp"

#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gqa/program.hpp"

namespace gqa {

using nlohmann::json;

std::string_view to_string(MetricsErrorKind k) {
    switch (k) {
        case MetricsErrorKind::EmptyInput: return "EmptyInput";
        case MetricsErrorKind::DanglingParent: return "DanglingParent";
        case MetricsErrorKind::DuplicateQid: return "DuplicateQid";
        case MetricsErrorKind::SelfParent: return "SelfParent";
        case MetricsErrorKind::BadK: return "BadK";
        case MetricsErrorKind::MalformedRecord: return "MalformedRecord";
    }
    return "?";
}

MetricsError::MetricsError(MetricsErrorKind kind, const std::string& what, std::size_t line)
    : std::runtime_error(std::string(to_string(kind)) + (line ? " on line " + std::to_string(line) : "") + ": " +
                         what),
      kind_(kind),
      line_(line) {}

std::string normalize_answer(std::string_view s) { return normalize_text(s); }

bool is_correct(const PredictionRecord& r) { return normalize_answer(r.predicted) == normalize_answer(r.gold); }

QuestionClass classify_question(std::string_view gold, std::string_view root_subtype) {
    auto g = normalize_answer(gold);
    if (g == "yes" || g == "no") return QuestionClass::Binary;
    if (root_subtype.substr(0, 7) == "choose_") return QuestionClass::Binary;
    return QuestionClass::Open;
}

Accuracy accuracy(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw MetricsError(MetricsErrorKind::EmptyInput, "no records");
    std::size_t correct = 0;
    std::size_t n[2] = {0, 0}, c[2] = {0, 0};
    for (const auto& r : records) {
        bool ok = is_correct(r);
        auto cls = static_cast<std::size_t>(r.q_class);
        correct += ok;
        ++n[cls];
        c[cls] += ok;
    }
    auto frac = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    return {*frac(correct, records.size()), frac(c[0], n[0]), frac(c[1], n[1])};
}

void validate_links(const std::vector<PredictionRecord>& records) {
    std::unordered_set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.qid).second) throw MetricsError(MetricsErrorKind::DuplicateQid, "duplicate qid " + r.qid);
    }
    for (const auto& r : records) {
        if (!r.parent_qid) continue;
        if (*r.parent_qid == r.qid) throw MetricsError(MetricsErrorKind::SelfParent, r.qid + " is its own parent");
        if (!ids.count(*r.parent_qid)) {
            throw MetricsError(MetricsErrorKind::DanglingParent,
                               r.qid + " references unknown parent " + *r.parent_qid);
        }
    }
}

RcCounts rc_counts(const std::vector<PredictionRecord>& records, std::size_t k) {
    if (k < 1) throw MetricsError(MetricsErrorKind::BadK, "k must be at least 1");
    validate_links(records);

    struct SubStats {
        std::size_t count = 0;
        bool all_correct = true;
    };
    std::unordered_map<std::string, SubStats> subs;
    for (const auto& r : records) {
        if (!r.parent_qid) continue;
        auto& s = subs[*r.parent_qid];
        ++s.count;
        s.all_correct = s.all_correct && is_correct(r);
    }

    RcCounts counts;
    for (const auto& q : records) {
        if (q.parent_qid) continue;
        auto it = subs.find(q.qid);
        if (it == subs.end() || it->second.count < k || !is_correct(q)) continue;
        ++counts.parents;
        counts.consistent += it->second.all_correct;
    }
    return counts;
}

std::optional<double> rc_k(const std::vector<PredictionRecord>& records, std::size_t k) {
    return rc_counts(records, k).value();
}

ConsistencyReport consistency_report(const std::vector<PredictionRecord>& records, std::size_t k_max) {
    if (records.empty()) throw MetricsError(MetricsErrorKind::EmptyInput, "no records");
    validate_links(records);

    std::vector<PredictionRecord> top, sub;
    for (const auto& r : records) (r.parent_qid ? sub : top).push_back(r);

    ConsistencyReport report;
    report.total = records.size();
    if (!top.empty()) {
        auto a = accuracy(top);
        report.acc = a.acc;
        report.binary_acc = a.binary_acc;
        report.open_acc = a.open_acc;
    }
    if (!sub.empty()) report.acc_sub = accuracy(sub).acc;
    for (std::size_t k = 1; k <= k_max; ++k) report.rc[k] = rc_k(records, k);
    return report;
}

namespace {
json fraction(const std::optional<double>& v) { return v ? json(*v) : json("n/a"); }

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << *v * 100.0;
    return os.str();
}
}  // namespace

json report_to_json(const ConsistencyReport& report) {
    json rc = json::object();
    for (const auto& [k, v] : report.rc) rc[std::to_string(k)] = fraction(v);
    return {
        {"total", report.total},       {"acc", fraction(report.acc)},
        {"acc_sub", fraction(report.acc_sub)}, {"binary_acc", fraction(report.binary_acc)},
        {"open_acc", fraction(report.open_acc)}, {"rc", std::move(rc)},
    };
}

std::string report_table(const ConsistencyReport& report) {
    std::ostringstream os;
    auto row = [&](const std::string& name, const std::optional<double>& v) {
        os << std::left << std::setw(10) << name << std::right << std::setw(8) << percent(v) << '\n';
    };
    os << std::left << std::setw(10) << "metric" << std::right << std::setw(8) << "value" << '\n';
    row("Binary", report.binary_acc);
    row("Open", report.open_acc);
    row("Acc", report.acc);
    row("Acc(Sub)", report.acc_sub);
    for (const auto& [k, v] : report.rc) row("RC(" + std::to_string(k) + ")", v);
    return os.str();
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (normalize_text(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MetricsError(MetricsErrorKind::MalformedRecord, e.what(), lineno);
        }
        auto str = [&](const char* key, bool required) -> std::optional<std::string> {
            auto it = j.find(key);
            if (it == j.end() || it->is_null()) {
                if (required) throw MetricsError(MetricsErrorKind::MalformedRecord, std::string("missing '") + key + "'", lineno);
                return std::nullopt;
            }
            if (!it->is_string()) {
                throw MetricsError(MetricsErrorKind::MalformedRecord, std::string("'") + key + "' is not a string", lineno);
            }
            return it->get<std::string>();
        };
        if (!j.is_object()) throw MetricsError(MetricsErrorKind::MalformedRecord, "not a JSON object", lineno);
        PredictionRecord r;
        r.qid = *str("qid", true);
        r.predicted = normalize_answer(*str("predicted", true));
        r.gold = normalize_answer(*str("gold", true));
        r.parent_qid = str("parent", false);
        if (auto cls = str("class", false)) {
            auto c = normalize_text(*cls);
            if (c == "binary") {
                r.q_class = QuestionClass::Binary;
            } else if (c == "open") {
                r.q_class = QuestionClass::Open;
            } else {
                throw MetricsError(MetricsErrorKind::MalformedRecord, "unknown class '" + *cls + "'", lineno);
            }
        } else {
            r.q_class = classify_question(r.gold);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace gqa
