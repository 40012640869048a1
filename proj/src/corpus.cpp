#include "pdl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "io.hpp"
#include "pdl/error.hpp"
#include "pdl/rng.hpp"

namespace pdl {

namespace {

constexpr const char* kSpecialNames[kNumSpecial] = {"<pad>", "<bos>", "<eos>", "<unk>"};

bool is_unicode_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
           cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
           cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Length in bytes of the whitespace code point starting at text[i], or 0.
std::size_t whitespace_length(std::string_view text, std::size_t i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    const unsigned char lead = byte(i);
    if (lead < 0x80) return is_unicode_space(lead) ? 1 : 0;
    std::size_t len = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else {
        return 0;  // 4-byte sequences contain no whitespace; stray bytes are content
    }
    if (i + len > text.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
    return is_unicode_space(cp) ? len : 0;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    std::size_t start = 0;
    bool in_token = false;
    while (i < text.size()) {
        const std::size_t ws = whitespace_length(text, i);
        if (ws > 0) {
            if (in_token) tokens.emplace_back(text.substr(start, i - start));
            in_token = false;
            i += ws;
        } else {
            if (!in_token) start = i;
            in_token = true;
            ++i;
        }
    }
    if (in_token) tokens.emplace_back(text.substr(start));
    return tokens;
}

std::vector<std::string> split_bytes(std::string_view text) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::vector<std::string> tokens;
    tokens.reserve(text.size());
    for (const char c : text) {
        const auto b = static_cast<unsigned char>(c);
        tokens.push_back({kHex[b >> 4], kHex[b & 0x0F]});
    }
    return tokens;
}

}  // namespace

TokenizerScheme parse_tokenizer_scheme(std::string_view name) {
    if (name == "whitespace") return TokenizerScheme::Whitespace;
    if (name == "bytes") return TokenizerScheme::Bytes;
    fail(ErrorKind::Config, "unknown tokenizer scheme '" + std::string(name) + "'");
}

std::string_view to_string(TokenizerScheme scheme) {
    return scheme == TokenizerScheme::Whitespace ? "whitespace" : "bytes";
}

std::vector<std::string> tokenize(std::string_view text, TokenizerScheme scheme) {
    return scheme == TokenizerScheme::Whitespace ? split_whitespace(text) : split_bytes(text);
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
    for (const char* name : kSpecialNames) append(name);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& ordinary_tokens) {
    Vocab vocab;
    for (const auto& token : ordinary_tokens) {
        if (token.empty() || token.find_first_of("\t\n\r") != std::string::npos)
            fail(ErrorKind::Data, "token '" + token + "' cannot be stored in a vocab file");
        if (vocab.find(token)) fail(ErrorKind::Data, "duplicate token '" + token + "'");
        vocab.append(token);
    }
    return vocab;
}

void Vocab::append(std::string token) {
    token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(token));
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    const auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocab::id_or_unk(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        fail(ErrorKind::Data, "token id " + std::to_string(id) + " outside vocab of size " +
                                  std::to_string(id_to_token_.size()));
    return id_to_token_[static_cast<std::size_t>(id)];
}

Vocab build_vocab(const std::vector<std::string>& tokens, std::int64_t min_count) {
    if (min_count < 1) fail(ErrorKind::Config, "min_count must be >= 1");
    std::map<std::string, std::int64_t> counts;
    for (const auto& token : tokens) ++counts[token];
    for (const char* name : kSpecialNames) counts.erase(name);

    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [token, count] : counts)
        if (count >= min_count) kept.emplace_back(token, count);
    // counts is lexicographically ordered, so a stable sort keeps the tie-break.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> ordered;
    ordered.reserve(kept.size());
    for (auto& [token, count] : kept) ordered.push_back(std::move(token));
    return Vocab::from_tokens(ordered);
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& documents, std::int64_t min_count) {
    std::vector<std::string> flat;
    for (const auto& doc : documents) flat.insert(flat.end(), doc.begin(), doc.end());
    return build_vocab(flat, min_count);
}

TokenSequence encode(const Vocab& vocab, const std::vector<std::string>& tokens) {
    TokenSequence ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(kBos);
    for (const auto& token : tokens) ids.push_back(vocab.id_or_unk(token));
    ids.push_back(kEos);
    return ids;
}

std::vector<std::string> decode(const Vocab& vocab, const TokenSequence& ids) {
    std::vector<std::string> tokens;
    for (const TokenId id : ids) {
        if (id == kBos || id == kEos || id == kPad) continue;
        tokens.push_back(vocab.token(id));
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// EncodedCorpus

std::size_t EncodedCorpus::num_tokens() const {
    std::size_t n = 0;
    for (const auto& seq : sequences) n += seq.size();
    return n;
}

void EncodedCorpus::validate() const {
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        if (seq.size() < 2 || seq.front() != kBos || seq.back() != kEos)
            fail(ErrorKind::Data, "sequence " + std::to_string(s) + " is not BOS/EOS framed");
        for (std::size_t k = 0; k < seq.size(); ++k) {
            if (seq[k] < 0 || static_cast<std::size_t>(seq[k]) >= vocab_size)
                fail(ErrorKind::Data, "token id " + std::to_string(seq[k]) + " at sequence " +
                                          std::to_string(s) + " position " + std::to_string(k) +
                                          " outside vocab of size " + std::to_string(vocab_size));
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic Zipf corpora

void SynthConfig::validate() const {
    if (vocab_size < 1) fail(ErrorKind::Config, "synth.vocab_size must be >= 1");
    if (!(zipf_exponent > 0.0) || !std::isfinite(zipf_exponent))
        fail(ErrorKind::Config, "synth.zipf_exponent must be a positive finite number");
    if (!(zipf_shift >= 0.0) || !std::isfinite(zipf_shift))
        fail(ErrorKind::Config, "synth.zipf_shift must be a nonnegative finite number");
    if (num_tokens < 1) fail(ErrorKind::Config, "synth.num_tokens must be > 0");
    if (rule_trigger_ids.size() != rule_target_ids.size())
        fail(ErrorKind::Config, "synth.rule_triggers and synth.rule_targets differ in length");

    const std::size_t quartile = vocab_size / 4;
    const std::size_t rare_first_rank = vocab_size - quartile + 1;
    if (rule_trigger_ids.empty()) {
        if (num_rules > quartile)
            fail(ErrorKind::Config, "synth.num_rules exceeds the rarest-quartile size " +
                                        std::to_string(quartile));
        return;
    }
    if (num_rules != 0 && num_rules != rule_trigger_ids.size())
        fail(ErrorKind::Config, "synth.num_rules disagrees with the explicit rule lists");

    const auto rank_of = [](TokenId id) { return static_cast<std::size_t>(id - kNumSpecial + 1); };
    const auto in_range = [&](TokenId id) {
        return id >= kNumSpecial && rank_of(id) <= vocab_size;
    };
    std::unordered_set<TokenId> triggers;
    std::unordered_set<TokenId> targets(rule_target_ids.begin(), rule_target_ids.end());
    for (const TokenId t : rule_trigger_ids) {
        if (!in_range(t)) fail(ErrorKind::Config, "synth.rule_triggers: id " + std::to_string(t) + " out of range");
        if (!triggers.insert(t).second)
            fail(ErrorKind::Config, "synth.rule_triggers: duplicate trigger " + std::to_string(t));
        if (targets.count(t))
            fail(ErrorKind::Config, "synth.rule_triggers: " + std::to_string(t) + " is also a rule target");
    }
    for (const TokenId t : rule_target_ids) {
        if (!in_range(t) || rank_of(t) < rare_first_rank)
            fail(ErrorKind::Config, "synth.rule_targets: id " + std::to_string(t) +
                                        " is not in the rarest rank quartile");
    }
}

std::vector<double> zipf_mandelbrot_pmf(std::size_t vocab_size, double exponent, double shift) {
    std::vector<double> pmf(vocab_size);
    double norm = 0.0;
    for (std::size_t r = 1; r <= vocab_size; ++r) {
        pmf[r - 1] = std::pow(static_cast<double>(r) + shift, -exponent);
        norm += pmf[r - 1];
    }
    for (double& p : pmf) p /= norm;
    return pmf;
}

std::vector<Rule> resolve_rules(const SynthConfig& config) {
    config.validate();
    std::vector<Rule> rules;
    if (!config.rule_trigger_ids.empty()) {
        for (std::size_t i = 0; i < config.rule_trigger_ids.size(); ++i)
            rules.push_back({config.rule_trigger_ids[i], config.rule_target_ids[i]});
        return rules;
    }
    if (config.num_rules == 0) return rules;

    const std::size_t quartile = config.vocab_size / 4;
    const std::size_t rare_first = config.vocab_size - quartile + 1;
    const std::size_t trigger_first = rare_first - quartile;
    std::vector<TokenId> trigger_pool;
    std::vector<TokenId> target_pool;
    for (std::size_t r = 0; r < quartile; ++r) {
        trigger_pool.push_back(synth_id_for_rank(trigger_first + r));
        target_pool.push_back(synth_id_for_rank(rare_first + r));
    }
    Rng rng(derive_seed(config.seed, 1));
    rng.shuffle(std::span(trigger_pool));
    rng.shuffle(std::span(target_pool));
    for (std::size_t i = 0; i < config.num_rules; ++i)
        rules.push_back({trigger_pool[i], target_pool[i]});
    return rules;
}

SynthCorpus generate_zipf_corpus(const SynthConfig& config) {
    config.validate();
    SynthCorpus out;
    out.rules = resolve_rules(config);

    std::vector<std::string> names;
    names.reserve(config.vocab_size);
    for (std::size_t r = 1; r <= config.vocab_size; ++r) names.push_back("w" + std::to_string(r));
    out.vocab = Vocab::from_tokens(names);
    out.corpus.vocab_size = out.vocab.size();

    const auto pmf = zipf_mandelbrot_pmf(config.vocab_size, config.zipf_exponent, config.zipf_shift);
    std::vector<double> cdf(pmf.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) cdf[i] = (acc += pmf[i]);

    std::vector<TokenId> target_of(out.vocab.size(), -1);
    for (const Rule& rule : out.rules) target_of[static_cast<std::size_t>(rule.trigger)] = rule.target;
    if (!out.rules.empty() && out.rules.size() == config.vocab_size)
        fail(ErrorKind::Config, "synth: every token is a trigger");

    Rng rng(derive_seed(config.seed, 0));
    const auto draw = [&]() {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const auto index = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        return synth_id_for_rank(index + 1);
    };

    TokenId pending = -1;
    TokenSequence current{kBos};
    for (std::size_t pos = 0; pos < config.num_tokens; ++pos) {
        const std::size_t slot = pos % kSynthChunkLength;
        const bool last_slot = slot == kSynthChunkLength - 1 || pos + 1 == config.num_tokens;
        TokenId token;
        if (pending >= 0) {
            token = pending;
            pending = -1;
        } else {
            token = draw();
            while (last_slot && target_of[static_cast<std::size_t>(token)] >= 0) token = draw();
            pending = target_of[static_cast<std::size_t>(token)];
        }
        current.push_back(token);
        if (last_slot) {
            current.push_back(kEos);
            out.corpus.sequences.push_back(std::move(current));
            current = TokenSequence{kBos};
        }
    }
    return out;
}

std::pair<EncodedCorpus, EncodedCorpus> split_corpus(const EncodedCorpus& corpus, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0))
        fail(ErrorKind::Config, "validation fraction must be in [0, 1)");
    const auto n = corpus.sequences.size();
    const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    EncodedCorpus train{{corpus.sequences.begin(), corpus.sequences.end() - static_cast<std::ptrdiff_t>(held)},
                        corpus.vocab_size};
    EncodedCorpus valid{{corpus.sequences.end() - static_cast<std::ptrdiff_t>(held), corpus.sequences.end()},
                        corpus.vocab_size};
    return {std::move(train), std::move(valid)};
}

// ---------------------------------------------------------------------------
// Persistence

void save_corpus(const EncodedCorpus& corpus, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    for (const auto& seq : corpus.sequences) {
        for (std::size_t k = 0; k < seq.size(); ++k) {
            if (k) out << ' ';
            out << seq[k];
        }
        out << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

EncodedCorpus load_corpus(const std::filesystem::path& path, std::size_t vocab_size) {
    const std::string source = path.string();
    EncodedCorpus corpus;
    corpus.vocab_size = vocab_size;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        TokenSequence seq;
        for (const auto field : io::split(lines[i], ' ')) {
            const auto id = io::parse_int(field, source, i + 1);
            if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
                fail_parse(source, i + 1, "token id " + std::to_string(id) + " outside vocab of size " +
                                              std::to_string(vocab_size));
            seq.push_back(static_cast<TokenId>(id));
        }
        if (seq.size() < 2 || seq.front() != kBos || seq.back() != kEos)
            fail_parse(source, i + 1, "sequence is not BOS/EOS framed");
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    for (std::size_t id = 0; id < vocab.size(); ++id)
        out << id << '\t' << vocab.token(static_cast<TokenId>(id)) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

Vocab load_vocab(const std::filesystem::path& path) {
    const std::string source = path.string();
    const auto lines = io::read_lines(path);
    std::vector<std::string> ordinary;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto tab = lines[i].find('\t');
        if (tab == std::string::npos) fail_parse(source, i + 1, "expected 'id<TAB>token'");
        const auto id = io::parse_int(std::string_view(lines[i]).substr(0, tab), source, i + 1);
        if (id != static_cast<std::int64_t>(i)) fail_parse(source, i + 1, "ids must be dense and in order");
        std::string token = lines[i].substr(tab + 1);
        if (i < static_cast<std::size_t>(kNumSpecial)) {
            if (token != kSpecialNames[i])
                fail_parse(source, i + 1, "expected special token '" + std::string(kSpecialNames[i]) + "'");
            continue;
        }
        ordinary.push_back(std::move(token));
    }
    if (lines.size() < static_cast<std::size_t>(kNumSpecial))
        fail_parse(source, lines.size() + 1, "vocab is missing special tokens");
    try {
        return Vocab::from_tokens(ordinary);
    } catch (const Error& e) {
        fail(ErrorKind::Parse, source + ": " + e.what());
    }
}

void save_rules(const std::vector<Rule>& rules, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    for (const Rule& rule : rules) out << rule.trigger << '\t' << rule.target << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::vector<Rule> load_rules(const std::filesystem::path& path, std::size_t vocab_size) {
    const std::string source = path.string();
    std::vector<Rule> rules;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto fields = io::split(lines[i], '\t');
        if (fields.size() != 2) fail_parse(source, i + 1, "expected 'trigger<TAB>target'");
        const auto trigger = io::parse_int(fields[0], source, i + 1);
        const auto target = io::parse_int(fields[1], source, i + 1);
        for (const auto id : {trigger, target})
            if (id < kNumSpecial || static_cast<std::size_t>(id) >= vocab_size)
                fail_parse(source, i + 1, "rule id " + std::to_string(id) + " out of range");
        rules.push_back({static_cast<TokenId>(trigger), static_cast<TokenId>(target)});
    }
    return rules;
}

}  // namespace pdl
