#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pdl/corpus.hpp"
#include "pdl/eval.hpp"
#include "pdl/gradcheck.hpp"
#include "pdl/trainer.hpp"

namespace pdl {

inline constexpr std::string_view kToolVersion = "pdl-0.1.0";
inline constexpr std::string_view kOutDirEnv = "PDL_OUT_DIR";

/// Output and input locations. Empty entries resolve to a default file name
/// under out_dir.
struct PathConfig {
    std::string out_dir;
    std::string text;
    std::string corpus;
    std::string valid_corpus;
    std::string vocab;
    std::string rules;
    std::string freq;
    std::string weights;
    std::string checkpoint;
    std::string history;
    std::string metrics;
    std::string report;
    std::string report_csv;
    std::string gradcheck;
};

/// One experiment. Sections of the text form: paths, tokenizer, synth, pdl,
/// model, train, eval, gradcheck, compare.
struct RunConfig {
    PathConfig paths;
    TokenizerScheme scheme = TokenizerScheme::Whitespace;
    std::int64_t min_count = 1;
    SynthConfig synth;
    double validation_fraction = 0.1;
    TrainConfig train;  // carries the pdl.* and model.* values too
    EvalOptions eval;
    GradcheckOptions gradcheck;
    double gradcheck_threshold = 1e-5;
    std::vector<std::uint64_t> compare_seeds{1};
    bool compare_synthesize = true;

    /// Checks every numeric constraint; throws a configuration error.
    void validate() const;

    std::filesystem::path resolve(const std::string& configured, std::string_view default_name) const;
};

/// Parses `[section]` headers and `key = value` lines; `#` and `;` start
/// comments. Unknown sections or keys are rejected with their line number.
/// Keys absent from the text keep the values already in `base`.
RunConfig parse_config(std::string_view text, const std::string& source, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one `section.key` from its text form.
void set_config_value(RunConfig& config, std::string_view dotted_key, std::string_view value);

/// Canonical text form, every key in a fixed order. `out_dir` is omitted so
/// that the same experiment echoes identically wherever it is written.
std::string serialize_config(const RunConfig& config);

/// FNV-1a 64 over the canonical form without the [paths] section, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Built-in configs by name: "default" and "default-compare".
RunConfig preset_config(std::string_view name);
std::string preset_text(std::string_view name);

}  // namespace pdl
