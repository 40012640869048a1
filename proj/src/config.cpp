#include "pdl/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "io.hpp"
#include "pdl/error.hpp"

namespace pdl {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string fmt_double(double x) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

double to_double(std::string_view v) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        fail(ErrorKind::Config, "expected a number, got '" + std::string(v) + "'");
    return x;
}

std::uint64_t to_uint(std::string_view v) {
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        fail(ErrorKind::Config, "expected a nonnegative integer, got '" + std::string(v) + "'");
    return x;
}

std::int64_t to_int(std::string_view v) {
    std::int64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        fail(ErrorKind::Config, "expected an integer, got '" + std::string(v) + "'");
    return x;
}

bool to_bool(std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorKind::Config, "expected true or false, got '" + std::string(v) + "'");
}

template <typename Int>
std::vector<Int> to_list(std::string_view v) {
    std::vector<Int> out;
    if (trim(v).empty()) return out;
    for (const auto part : io::split(v, ',')) {
        const std::string item = trim(part);
        if constexpr (std::is_signed_v<Int>)
            out.push_back(static_cast<Int>(to_int(item)));
        else
            out.push_back(static_cast<Int>(to_uint(item)));
    }
    return out;
}

template <typename Int>
std::string from_list(const std::vector<Int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

struct Field {
    std::string_view section;
    std::string_view key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

#define PDL_STRING_FIELD(sec, name, member)                                            \
    Field {                                                                            \
        sec, name, [](const RunConfig& c) { return c.member; },                        \
            [](RunConfig& c, std::string_view v) { c.member = std::string(v); }        \
    }
#define PDL_DOUBLE_FIELD(sec, name, member)                                            \
    Field {                                                                            \
        sec, name, [](const RunConfig& c) { return fmt_double(c.member); },            \
            [](RunConfig& c, std::string_view v) { c.member = to_double(v); }          \
    }
#define PDL_SIZE_FIELD(sec, name, member)                                              \
    Field {                                                                            \
        sec, name, [](const RunConfig& c) { return std::to_string(c.member); },        \
            [](RunConfig& c, std::string_view v) {                                     \
                c.member = static_cast<decltype(c.member)>(to_uint(v));                \
            }                                                                          \
    }
#define PDL_INT_FIELD(sec, name, member)                                               \
    Field {                                                                            \
        sec, name, [](const RunConfig& c) { return std::to_string(c.member); },        \
            [](RunConfig& c, std::string_view v) {                                     \
                c.member = static_cast<decltype(c.member)>(to_int(v));                 \
            }                                                                          \
    }
#define PDL_BOOL_FIELD(sec, name, member)                                              \
    Field {                                                                            \
        sec, name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
            [](RunConfig& c, std::string_view v) { c.member = to_bool(v); }            \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        PDL_STRING_FIELD("paths", "out_dir", paths.out_dir),
        PDL_STRING_FIELD("paths", "text", paths.text),
        PDL_STRING_FIELD("paths", "corpus", paths.corpus),
        PDL_STRING_FIELD("paths", "valid_corpus", paths.valid_corpus),
        PDL_STRING_FIELD("paths", "vocab", paths.vocab),
        PDL_STRING_FIELD("paths", "rules", paths.rules),
        PDL_STRING_FIELD("paths", "freq", paths.freq),
        PDL_STRING_FIELD("paths", "weights", paths.weights),
        PDL_STRING_FIELD("paths", "checkpoint", paths.checkpoint),
        PDL_STRING_FIELD("paths", "history", paths.history),
        PDL_STRING_FIELD("paths", "metrics", paths.metrics),
        PDL_STRING_FIELD("paths", "report", paths.report),
        PDL_STRING_FIELD("paths", "report_csv", paths.report_csv),
        PDL_STRING_FIELD("paths", "gradcheck", paths.gradcheck),

        Field{"tokenizer", "scheme", [](const RunConfig& c) { return std::string(to_string(c.scheme)); },
              [](RunConfig& c, std::string_view v) { c.scheme = parse_tokenizer_scheme(v); }},
        PDL_INT_FIELD("tokenizer", "min_count", min_count),

        PDL_SIZE_FIELD("synth", "vocab_size", synth.vocab_size),
        PDL_DOUBLE_FIELD("synth", "zipf_exponent", synth.zipf_exponent),
        PDL_DOUBLE_FIELD("synth", "zipf_shift", synth.zipf_shift),
        PDL_SIZE_FIELD("synth", "num_tokens", synth.num_tokens),
        PDL_SIZE_FIELD("synth", "num_rules", synth.num_rules),
        Field{"synth", "rule_triggers", [](const RunConfig& c) { return from_list(c.synth.rule_trigger_ids); },
              [](RunConfig& c, std::string_view v) { c.synth.rule_trigger_ids = to_list<TokenId>(v); }},
        Field{"synth", "rule_targets", [](const RunConfig& c) { return from_list(c.synth.rule_target_ids); },
              [](RunConfig& c, std::string_view v) { c.synth.rule_target_ids = to_list<TokenId>(v); }},
        PDL_SIZE_FIELD("synth", "seed", synth.seed),
        PDL_DOUBLE_FIELD("synth", "validation_fraction", validation_fraction),

        PDL_DOUBLE_FIELD("pdl", "alpha", train.alpha),
        PDL_DOUBLE_FIELD("pdl", "epsilon", train.epsilon),
        Field{"pdl", "mode", [](const RunConfig& c) { return std::string(to_string(c.train.freq_mode)); },
              [](RunConfig& c, std::string_view v) { c.train.freq_mode = parse_freq_mode(v); }},
        PDL_BOOL_FIELD("pdl", "mean_normalized", train.mean_normalized),
        Field{"pdl", "w_max", [](const RunConfig& c) { return c.train.w_max ? fmt_double(*c.train.w_max) : std::string(); },
              [](RunConfig& c, std::string_view v) {
                  if (v.empty()) c.train.w_max.reset();
                  else c.train.w_max = to_double(v);
              }},
        Field{"pdl", "weight_table",
              [](const RunConfig& c) { return c.train.weight_table_path.value_or(std::string()); },
              [](RunConfig& c, std::string_view v) {
                  if (v.empty()) c.train.weight_table_path.reset();
                  else c.train.weight_table_path = std::string(v);
              }},

        PDL_INT_FIELD("model", "context_size", train.context_size),
        PDL_INT_FIELD("model", "embed_dim", train.embed_dim),

        Field{"train", "loss", [](const RunConfig& c) { return std::string(to_string(c.train.loss)); },
              [](RunConfig& c, std::string_view v) { c.train.loss = parse_loss_kind(v); }},
        PDL_DOUBLE_FIELD("train", "learning_rate", train.learning_rate),
        PDL_SIZE_FIELD("train", "batch_size", train.batch_size),
        PDL_SIZE_FIELD("train", "epochs", train.epochs),
        PDL_SIZE_FIELD("train", "seed", train.seed),

        PDL_INT_FIELD("eval", "num_buckets", train.num_buckets),
        PDL_SIZE_FIELD("eval", "num_prompts", eval.num_prompts),
        PDL_SIZE_FIELD("eval", "gen_len", eval.gen_len),

        PDL_SIZE_FIELD("gradcheck", "batches", gradcheck.batches),
        PDL_SIZE_FIELD("gradcheck", "max_vocab", gradcheck.max_vocab),
        PDL_SIZE_FIELD("gradcheck", "max_rows", gradcheck.max_rows),
        PDL_DOUBLE_FIELD("gradcheck", "h", gradcheck.h),
        PDL_SIZE_FIELD("gradcheck", "seed", gradcheck.seed),
        PDL_SIZE_FIELD("gradcheck", "model_vocab", gradcheck.model_vocab),
        PDL_INT_FIELD("gradcheck", "model_context", gradcheck.model_context),
        PDL_INT_FIELD("gradcheck", "model_dim", gradcheck.model_dim),
        PDL_SIZE_FIELD("gradcheck", "model_batch", gradcheck.model_batch),
        PDL_DOUBLE_FIELD("gradcheck", "threshold", gradcheck_threshold),

        Field{"compare", "seeds", [](const RunConfig& c) { return from_list(c.compare_seeds); },
              [](RunConfig& c, std::string_view v) { c.compare_seeds = to_list<std::uint64_t>(v); }},
        PDL_BOOL_FIELD("compare", "synthesize", compare_synthesize),
    };
    return table;
}

#undef PDL_STRING_FIELD
#undef PDL_DOUBLE_FIELD
#undef PDL_SIZE_FIELD
#undef PDL_INT_FIELD
#undef PDL_BOOL_FIELD

const Field* find_field(std::string_view section, std::string_view key) {
    for (const Field& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

bool known_section(std::string_view section) {
    for (const Field& f : fields())
        if (f.section == section) return true;
    return false;
}

std::string serialize(const RunConfig& config, bool include_paths) {
    std::ostringstream out;
    std::string_view current;
    for (const Field& f : fields()) {
        if (f.section == "paths" && (!include_paths || f.key == "out_dir")) continue;
        if (f.section != current) {
            if (!current.empty()) out << '\n';
            out << '[' << f.section << "]\n";
            current = f.section;
        }
        out << f.key << " = " << f.get(config) << '\n';
    }
    return out.str();
}

constexpr std::string_view kDefaultCompare = R"(# Flagship CE-vs-PDL comparison on a Zipf corpus with planted rare-token rules.
[synth]
vocab_size = 500
zipf_exponent = 1.1
zipf_shift = 2.7
num_tokens = 225000
num_rules = 50
seed = 7
validation_fraction = 0.1

[pdl]
alpha = 1
epsilon = 1e-08
mode = probabilities
mean_normalized = true

[model]
context_size = 2
embed_dim = 16

[train]
learning_rate = 0.1
batch_size = 32
epochs = 5

[eval]
num_buckets = 5
num_prompts = 8
gen_len = 64

[compare]
seeds = 1,2,3,4,5
synthesize = true
)";

}  // namespace

void RunConfig::validate() const {
    synth.validate();
    TrainConfig pdl_view = train;
    pdl_view.loss = LossKind::Pdl;
    pdl_view.validate();
    if (min_count < 1) fail(ErrorKind::Config, "tokenizer.min_count must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        fail(ErrorKind::Config, "synth.validation_fraction must be in [0, 1)");
    if (train.num_buckets < 2) fail(ErrorKind::Config, "eval.num_buckets must be >= 2");
    if (!(gradcheck.h >= 1e-7 && gradcheck.h <= 1e-3)) fail(ErrorKind::Config, "gradcheck.h must be in [1e-7, 1e-3]");
    if (gradcheck.batches < 1 || gradcheck.max_rows < 1 || gradcheck.max_vocab < 2)
        fail(ErrorKind::Config, "gradcheck sizes must be positive (max_vocab >= 2)");
    if (gradcheck.model_vocab <= static_cast<std::size_t>(kNumSpecial) || gradcheck.model_context < 1 ||
        gradcheck.model_dim < 1 || gradcheck.model_batch < 1)
        fail(ErrorKind::Config, "gradcheck model sizes out of range");
    if (!(gradcheck_threshold > 0.0)) fail(ErrorKind::Config, "gradcheck.threshold must be > 0");
    if (compare_seeds.empty()) fail(ErrorKind::Config, "compare.seeds must list at least one seed");
}

std::filesystem::path RunConfig::resolve(const std::string& configured, std::string_view default_name) const {
    if (!configured.empty()) return configured;
    const std::filesystem::path base = paths.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(paths.out_dir);
    return base / default_name;
}

void set_config_value(RunConfig& config, std::string_view dotted_key, std::string_view value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string_view::npos) fail(ErrorKind::Config, "expected section.key, got '" + std::string(dotted_key) + "'");
    const Field* field = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
    if (!field) fail(ErrorKind::Config, "unknown config key '" + std::string(dotted_key) + "'");
    try {
        field->set(config, trim(value));
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string(dotted_key) + ": " + e.what());
    }
}

namespace {

// Well-formed lines naming an unknown key or carrying a bad value are
// configuration errors rather than syntax errors.
[[noreturn]] void fail_config_at(const std::string& source, std::size_t line, const std::string& message) {
    fail(ErrorKind::Config, source + ":" + std::to_string(line) + ": " + message);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source, RunConfig base) {
    std::string section;
    const auto lines = io::split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = trim(lines[i]);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail_parse(source, i + 1, "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!known_section(section)) fail_config_at(source, i + 1, "unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail_parse(source, i + 1, "expected 'key = value'");
        if (section.empty()) fail_parse(source, i + 1, "key outside of a section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const Field* field = find_field(section, key);
        if (!field) fail_config_at(source, i + 1, "unknown key '" + key + "' in section [" + section + "]");
        try {
            field->set(base, trim(std::string_view(line).substr(eq + 1)));
        } catch (const Error& e) {
            fail_config_at(source, i + 1, section + "." + key + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    return parse_config(io::read_file(path), path.string(), std::move(base));
}

std::string serialize_config(const RunConfig& config) { return serialize(config, true); }

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : serialize(config, false)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string preset_text(std::string_view name) {
    if (name == "default") return serialize_config(RunConfig{});
    if (name == "default-compare") return std::string(kDefaultCompare);
    fail(ErrorKind::Config, "unknown preset '" + std::string(name) + "'");
}

RunConfig preset_config(std::string_view name) {
    return parse_config(preset_text(name), "preset:" + std::string(name));
}

}  // namespace pdl
