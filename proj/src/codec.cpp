#include "gqa/codec.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gqa {

std::string_view to_string(ObjectFormat f) {
    switch (f) {
        case ObjectFormat::CoordsOnly: return "coords";
        case ObjectFormat::NameFirst: return "name-first";
        case ObjectFormat::NameLast: return "name-last";
    }
    return "?";
}

ObjectFormat parse_object_format(std::string_view s) {
    if (s == "coords") return ObjectFormat::CoordsOnly;
    if (s == "name-first") return ObjectFormat::NameFirst;
    if (s == "name-last") return ObjectFormat::NameLast;
    throw CodecError(CodecErrorKind::BadConfig, "unknown object format '" + std::string(s) + "'");
}

std::string_view to_string(CodecErrorKind k) {
    switch (k) {
        case CodecErrorKind::BadExtent: return "BadExtent";
        case CodecErrorKind::BadBin: return "BadBin";
        case CodecErrorKind::BadCoordinate: return "BadCoordinate";
        case CodecErrorKind::BadConfig: return "BadConfig";
        case CodecErrorKind::OutOfVocab: return "OutOfVocab";
        case CodecErrorKind::MalformedSequence: return "MalformedSequence";
    }
    return "?";
}

CodecError::CodecError(CodecErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void CodecConfig::validate() const {
    if (bins < 2) throw CodecError(CodecErrorKind::BadConfig, "bins must be at least 2");
    if (max_objects < 1) throw CodecError(CodecErrorKind::BadConfig, "max_objects must be at least 1");
    for (const auto* vocab : {&answer_vocab, &name_vocab}) {
        std::set<std::string> seen;
        for (const auto& w : *vocab) {
            if (!seen.insert(w).second) throw CodecError(CodecErrorKind::BadConfig, "duplicate vocabulary entry '" + w + "'");
        }
    }
}

std::size_t quantize(double coord, double extent, std::size_t bins) {
    if (!(extent > 0) || !std::isfinite(extent)) {
        throw CodecError(CodecErrorKind::BadExtent, "extent must be positive and finite");
    }
    if (!std::isfinite(coord)) throw CodecError(CodecErrorKind::BadCoordinate, "coordinate is not finite");
    double scaled = std::floor(coord / extent * static_cast<double>(bins));
    if (scaled <= 0) return 0;
    if (scaled >= static_cast<double>(bins - 1)) return bins - 1;
    return static_cast<std::size_t>(scaled);
}

double dequantize(std::size_t bin, double extent, std::size_t bins) {
    if (bin >= bins) {
        throw CodecError(CodecErrorKind::BadBin, "bin " + std::to_string(bin) + " outside [0, " + std::to_string(bins) + ")");
    }
    if (!(extent > 0) || !std::isfinite(extent)) {
        throw CodecError(CodecErrorKind::BadExtent, "extent must be positive and finite");
    }
    return (static_cast<double>(bin) + 0.5) / static_cast<double>(bins) * extent;
}

VocabLayout::VocabLayout(const CodecConfig& cfg)
    : bins_(static_cast<TokenId>(cfg.bins)), answers_(cfg.answer_vocab), names_(cfg.name_vocab) {
    for (std::size_t i = 0; i < answers_.size(); ++i) answer_ids_.emplace(answers_[i], answer_base() + i);
    for (std::size_t i = 0; i < names_.size(); ++i) name_ids_.emplace(names_[i], name_base() + i);
}

TokenId VocabLayout::answer_token(const std::string& answer) const {
    auto it = answer_ids_.find(answer);
    if (it == answer_ids_.end()) throw CodecError(CodecErrorKind::OutOfVocab, "answer '" + answer + "' not in vocabulary");
    return it->second;
}

TokenId VocabLayout::name_token(const std::string& name) const {
    auto it = name_ids_.find(name);
    if (it == name_ids_.end()) throw CodecError(CodecErrorKind::OutOfVocab, "name '" + name + "' not in vocabulary");
    return it->second;
}

TokenInfo VocabLayout::info(TokenId id) const {
    if (id < bins_) return {TokenKind::Coord, std::to_string(id)};
    if (id == begin()) return {TokenKind::Begin, "[BEG]"};
    if (id == sep()) return {TokenKind::Separator, "[SEP]"};
    if (id == end()) return {TokenKind::End, "[END]"};
    if (id == true_token()) return {TokenKind::True, "TRUE"};
    if (id == false_token()) return {TokenKind::False, "FALSE"};
    if (id < name_base()) return {TokenKind::Answer, answers_[id - answer_base()]};
    if (id < size()) return {TokenKind::Name, names_[id - name_base()]};
    throw CodecError(CodecErrorKind::MalformedSequence, "token id " + std::to_string(id) + " outside vocabulary");
}

std::vector<TokenInfo> VocabLayout::table() const {
    std::vector<TokenInfo> out;
    out.reserve(size());
    for (TokenId id = 0; id < size(); ++id) out.push_back(info(id));
    return out;
}

std::vector<TokenInfo> vocab_layout(const CodecConfig& cfg) {
    cfg.validate();
    return VocabLayout(cfg).table();
}

SupervisionCodec::SupervisionCodec(CodecConfig cfg) : cfg_((cfg.validate(), std::move(cfg))), layout_(cfg_) {}

SupervisionSequence SupervisionCodec::encode(const StepResult& result, ImageDims dims, std::uint64_t seed) const {
    SupervisionSequence seq;
    auto& out = seq.token_ids;
    out.push_back(layout_.begin());

    if (const auto* b = std::get_if<BooleanResult>(&result)) {
        out.push_back(b->value ? layout_.true_token() : layout_.false_token());
    } else if (const auto* a = std::get_if<AnswerResult>(&result)) {
        out.push_back(layout_.answer_token(a->value));
    } else {
        auto items = std::get<ObjectsResult>(result).items;
        if (cfg_.shuffle) deterministic_shuffle(items, seed);
        if (items.size() > cfg_.max_objects) items.resize(cfg_.max_objects);
        seq.empty_objects = items.empty();
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& it = items[i];
            if (i) out.push_back(layout_.sep());
            if (cfg_.format == ObjectFormat::NameFirst) out.push_back(layout_.name_token(it.name));
            for (auto [coord, extent] : {std::pair{it.bbox.x1, dims.width}, std::pair{it.bbox.y1, dims.height},
                                         std::pair{it.bbox.x2, dims.width}, std::pair{it.bbox.y2, dims.height}}) {
                out.push_back(static_cast<TokenId>(quantize(coord, extent, cfg_.bins)));
            }
            if (cfg_.format == ObjectFormat::NameLast) out.push_back(layout_.name_token(it.name));
        }
    }

    out.push_back(layout_.end());
    return seq;
}

StepResult SupervisionCodec::decode(const std::vector<TokenId>& tokens, ImageDims dims) const {
    auto malformed = [](const std::string& why) { return CodecError(CodecErrorKind::MalformedSequence, why); };
    if (tokens.size() < 2) throw malformed("sequence shorter than [BEG] [END]");
    if (tokens.front() != layout_.begin()) throw malformed("sequence does not start with [BEG]");
    if (tokens.back() != layout_.end()) throw malformed("sequence does not end with [END]");

    std::vector<TokenInfo> body;
    body.reserve(tokens.size() - 2);
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) body.push_back(layout_.info(tokens[i]));

    if (body.empty()) return ObjectsResult{};
    if (body.size() == 1) {
        switch (body[0].kind) {
            case TokenKind::True: return BooleanResult{true};
            case TokenKind::False: return BooleanResult{false};
            case TokenKind::Answer: return AnswerResult{body[0].text};
            default: break;
        }
    }

    ObjectsResult objs;
    const std::size_t width = group_width();
    std::size_t pos = 0;
    while (true) {
        if (objs.items.size() == cfg_.max_objects) throw malformed("more than max_objects object groups");
        if (pos + width > body.size()) throw malformed("incomplete object group at token " + std::to_string(pos + 1));
        ObjectItem item;
        std::size_t coord_start = pos;
        if (cfg_.format == ObjectFormat::NameFirst) {
            if (body[pos].kind != TokenKind::Name) throw malformed("expected name token at " + std::to_string(pos + 1));
            item.name = body[pos].text;
            ++coord_start;
        }
        double c[4];
        for (std::size_t k = 0; k < 4; ++k) {
            const auto& t = body[coord_start + k];
            if (t.kind != TokenKind::Coord) throw malformed("expected coordinate at " + std::to_string(coord_start + k + 1));
            double extent = (k % 2 == 0) ? dims.width : dims.height;
            c[k] = dequantize(tokens[coord_start + k + 1], extent, cfg_.bins);
        }
        if (cfg_.format == ObjectFormat::NameLast) {
            const auto& t = body[pos + 4];
            if (t.kind != TokenKind::Name) throw malformed("expected name token at " + std::to_string(pos + 5));
            item.name = t.text;
        }
        item.bbox = {c[0], c[1], c[2], c[3]};
        objs.items.push_back(std::move(item));
        pos += width;
        if (pos == body.size()) break;
        if (body[pos].kind != TokenKind::Separator) throw malformed("expected [SEP] at " + std::to_string(pos + 1));
        ++pos;
    }
    return objs;
}

std::string SupervisionCodec::render(const std::vector<TokenId>& tokens) const {
    std::string out;
    for (auto id : tokens) {
        if (!out.empty()) out.push_back(' ');
        if (id < layout_.size()) {
            out += layout_.info(id).text;
        } else {
            out += "<" + std::to_string(id) + "?>";
        }
    }
    return out;
}

std::vector<std::string> load_vocab(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    while (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

void save_vocab(const std::filesystem::path& path, const std::vector<std::string>& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
    for (const auto& w : vocab) out << w << '\n';
}

}  // namespace gqa
