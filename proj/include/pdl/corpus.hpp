#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pdl {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kNumSpecial = 4;

inline bool is_special(TokenId id) { return id >= 0 && id < kNumSpecial; }

enum class TokenizerScheme { Whitespace, Bytes };

TokenizerScheme parse_tokenizer_scheme(std::string_view name);
std::string_view to_string(TokenizerScheme scheme);

/// Splits text into token strings.
///
/// Whitespace splits on runs of Unicode whitespace (ASCII plus the Unicode
/// space separators, NEL, LS, PS) and preserves case. Bytes yields one token
/// per byte, rendered as two uppercase hex digits.
std::vector<std::string> tokenize(std::string_view text, TokenizerScheme scheme);

/// Dense token-string <-> id mapping. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocab {
public:
    Vocab();

    /// Appends the given tokens after the specials, in order. Duplicates or
    /// special names are rejected.
    static Vocab from_tokens(const std::vector<std::string>& ordinary_tokens);

    std::size_t size() const { return id_to_token_.size(); }
    std::optional<TokenId> find(std::string_view token) const;
    TokenId id_or_unk(std::string_view token) const;
    const std::string& token(TokenId id) const;

    friend bool operator==(const Vocab& a, const Vocab& b) {
        return a.id_to_token_ == b.id_to_token_;
    }

private:
    void append(std::string token);

    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
};

using TokenSequence = std::vector<TokenId>;

struct EncodedCorpus {
    std::vector<TokenSequence> sequences;
    std::size_t vocab_size = 0;

    std::size_t num_tokens() const;
    /// Throws a data error when an id is out of range or a sequence lacks
    /// its BOS/EOS framing.
    void validate() const;

    friend bool operator==(const EncodedCorpus&, const EncodedCorpus&) = default;
};

/// Planted deterministic bigram: every emission of `trigger` is followed by `target`.
struct Rule {
    TokenId trigger = 0;
    TokenId target = 0;

    friend bool operator==(const Rule&, const Rule&) = default;
};

/// Vocabulary from token counts: tokens with count >= min_count get ids from 4
/// upward in descending-count order, ties by lexicographic token order.
Vocab build_vocab(const std::vector<std::string>& tokens, std::int64_t min_count);
Vocab build_vocab(const std::vector<std::vector<std::string>>& documents,
                  std::int64_t min_count);

/// BOS + ids + EOS, unknown tokens mapped to UNK.
TokenSequence encode(const Vocab& vocab, const std::vector<std::string>& tokens);

/// Inverse of encode for in-vocab tokens; drops BOS/EOS/PAD framing.
std::vector<std::string> decode(const Vocab& vocab, const TokenSequence& ids);

inline constexpr std::size_t kSynthChunkLength = 64;

struct SynthConfig {
    std::size_t vocab_size = 1000;  // ranked ordinary tokens; specials come on top
    double zipf_exponent = 1.1;
    double zipf_shift = 2.7;
    std::size_t num_tokens = 1'000'000;
    std::size_t num_rules = 0;
    std::vector<TokenId> rule_trigger_ids;  // explicit rules; drawn from the seed when empty
    std::vector<TokenId> rule_target_ids;
    std::uint64_t seed = 1;

    /// Throws a configuration error naming the first violated field.
    void validate() const;
};

struct SynthCorpus {
    Vocab vocab;
    EncodedCorpus corpus;
    std::vector<Rule> rules;
};

/// Zipf-Mandelbrot target pmf over ranks 1..vocab_size: P(r) ∝ (r + shift)^-exponent.
std::vector<double> zipf_mandelbrot_pmf(std::size_t vocab_size, double exponent, double shift);

/// Token id assigned to Zipf rank r (1-based) in synthetic vocabularies.
inline TokenId synth_id_for_rank(std::size_t rank) {
    return static_cast<TokenId>(rank) + kNumSpecial - 1;
}

/// Resolves the rule list for a config: explicit ids when given, otherwise
/// num_rules triggers from the third rank quartile paired with targets from
/// the rarest quartile, drawn from the seed.
std::vector<Rule> resolve_rules(const SynthConfig& config);

/// Draws i.i.d. Zipf-Mandelbrot tokens, forcing each trigger's target to follow
/// it, and chunks the stream into sequences of kSynthChunkLength tokens plus
/// BOS/EOS. A trigger is never emitted in the last slot of a chunk.
SynthCorpus generate_zipf_corpus(const SynthConfig& config);

/// Splits off the trailing `fraction` of sequences (rounded down) as a held-out set.
std::pair<EncodedCorpus, EncodedCorpus> split_corpus(const EncodedCorpus& corpus,
                                                     double fraction);

// File formats: corpus is one space-separated id sequence per line; vocab is
// `id<TAB>token` per line in id order; rules are `trigger<TAB>target`.
void save_corpus(const EncodedCorpus& corpus, const std::filesystem::path& path);
EncodedCorpus load_corpus(const std::filesystem::path& path, std::size_t vocab_size);
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);
void save_rules(const std::vector<Rule>& rules, const std::filesystem::path& path);
std::vector<Rule> load_rules(const std::filesystem::path& path, std::size_t vocab_size);

}  // namespace pdl
