#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gqa/executor.hpp"

namespace gqa {

using TokenId = std::uint32_t;

enum class ObjectFormat { CoordsOnly, NameFirst, NameLast };

std::string_view to_string(ObjectFormat f);
/// Accepts "coords", "name-first", "name-last".
ObjectFormat parse_object_format(std::string_view s);

struct CodecConfig {
    std::size_t bins = 256;
    std::size_t max_objects = 4;
    bool shuffle = true;
    std::uint64_t seed = 0;
    ObjectFormat format = ObjectFormat::CoordsOnly;
    std::vector<std::string> answer_vocab;
    std::vector<std::string> name_vocab;

    /// Throws CodecError(BadConfig) on bins < 2, max_objects < 1 or duplicate vocabulary entries.
    void validate() const;
};

struct ImageDims {
    double width = 0;
    double height = 0;
};

struct SupervisionSequence {
    std::vector<TokenId> token_ids;
    /// Set when an empty object set was encoded as [BEG][END].
    bool empty_objects = false;

    std::size_t size() const { return token_ids.size(); }
};

enum class CodecErrorKind { BadExtent, BadBin, BadCoordinate, BadConfig, OutOfVocab, MalformedSequence };

std::string_view to_string(CodecErrorKind k);

class CodecError : public std::runtime_error {
public:
    CodecError(CodecErrorKind kind, const std::string& what);
    CodecErrorKind kind() const { return kind_; }

private:
    CodecErrorKind kind_;
};

/// floor(coord / extent * bins), clamped to [0, bins-1].
std::size_t quantize(double coord, double extent, std::size_t bins);
/// Bin centre: (bin + 0.5) / bins * extent.
double dequantize(std::size_t bin, double extent, std::size_t bins);

enum class TokenKind { Coord, Begin, Separator, End, True, False, Answer, Name };

struct TokenInfo {
    TokenKind kind;
    std::string text;
};

/// Token ids: [0, bins) coordinate bins, then [BEG] [SEP] [END] TRUE FALSE,
/// then answer_vocab, then name_vocab.
class VocabLayout {
public:
    explicit VocabLayout(const CodecConfig& cfg);

    TokenId begin() const { return bins_; }
    TokenId sep() const { return bins_ + 1; }
    TokenId end() const { return bins_ + 2; }
    TokenId true_token() const { return bins_ + 3; }
    TokenId false_token() const { return bins_ + 4; }
    TokenId answer_base() const { return bins_ + 5; }
    TokenId name_base() const { return answer_base() + static_cast<TokenId>(answers_.size()); }
    std::size_t size() const { return name_base() + names_.size(); }

    /// Throws OutOfVocab.
    TokenId answer_token(const std::string& answer) const;
    TokenId name_token(const std::string& name) const;

    TokenInfo info(TokenId id) const;
    std::vector<TokenInfo> table() const;

private:
    TokenId bins_;
    std::vector<std::string> answers_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, TokenId> answer_ids_;
    std::unordered_map<std::string, TokenId> name_ids_;
};

std::vector<TokenInfo> vocab_layout(const CodecConfig& cfg);

/// Stateless apart from its cached layout; safe to share across threads.
class SupervisionCodec {
public:
    explicit SupervisionCodec(CodecConfig cfg);

    const CodecConfig& config() const { return cfg_; }
    const VocabLayout& layout() const { return layout_; }

    /// Uses `seed` for the object shuffle when cfg.shuffle is on.
    SupervisionSequence encode(const StepResult& result, ImageDims dims, std::uint64_t seed) const;
    SupervisionSequence encode(const StepResult& result, ImageDims dims) const { return encode(result, dims, cfg_.seed); }

    /// Decoded objects carry empty ids; names are filled only for name formats.
    StepResult decode(const std::vector<TokenId>& tokens, ImageDims dims) const;

    /// Space-separated token meanings, e.g. "[BEG] 25 64 61 102 [END]".
    std::string render(const std::vector<TokenId>& tokens) const;

private:
    std::size_t group_width() const { return cfg_.format == ObjectFormat::CoordsOnly ? 4 : 5; }

    CodecConfig cfg_;
    VocabLayout layout_;
};

inline SupervisionSequence encode(const StepResult& result, ImageDims dims, const CodecConfig& cfg) {
    return SupervisionCodec(cfg).encode(result, dims);
}

inline StepResult decode(const SupervisionSequence& seq, ImageDims dims, const CodecConfig& cfg) {
    return SupervisionCodec(cfg).decode(seq.token_ids, dims);
}

/// Fisher-Yates over mt19937_64 so the permutation is identical on every platform.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed);

/// Newline-delimited UTF-8, one entry per line; blank trailing line ignored.
std::vector<std::string> load_vocab(const std::filesystem::path& path);
void save_vocab(const std::filesystem::path& path, const std::vector<std::string>& vocab);

}  // namespace gqa

#include <random>
#include <utility>

template <typename T>
void gqa::deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}
