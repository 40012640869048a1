#include "pdl/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "io.hpp"
#include "pdl/config.hpp"
#include "pdl/error.hpp"
#include "pdl/gradcheck.hpp"
#include "pdl/report.hpp"

namespace pdl::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string preset;
    std::vector<std::string> sets;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> epsilon;
    std::optional<std::size_t> epochs;
    bool dump_config = false;
};

struct Context {
    RunConfig config;
    std::string hash;
    HeaderFields header;
    std::ostream& out;
};

RunConfig effective_config(const CommonOptions& opts, std::string_view default_preset) {
    RunConfig config;
    if (!opts.config_path.empty()) {
        config = load_config(opts.config_path, opts.preset.empty() ? RunConfig{} : preset_config(opts.preset));
    } else {
        config = preset_config(opts.preset.empty() ? default_preset : opts.preset);
    }
    for (const auto& assignment : opts.sets) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Config, "--set expects section.key=value, got '" + assignment + "'");
        set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
    }
    if (opts.seed) {
        config.synth.seed = *opts.seed;
        config.train.seed = *opts.seed;
        config.gradcheck.seed = *opts.seed;
    }
    if (opts.alpha) config.train.alpha = *opts.alpha;
    if (opts.epsilon) config.train.epsilon = *opts.epsilon;
    if (opts.epochs) config.train.epochs = *opts.epochs;
    if (!opts.out_dir.empty()) {
        config.paths.out_dir = opts.out_dir;
    } else if (config.paths.out_dir.empty()) {
        const char* env = std::getenv(std::string(kOutDirEnv).c_str());
        config.paths.out_dir = env && *env ? env : ".";
    }
    config.validate();
    return config;
}

void echo_config(const Context& ctx, std::string_view command) {
    auto out = io::open_output(ctx.config.resolve("", std::string(command) + ".config.ini"));
    out << "# " << kToolVersion << " " << command << " config_hash=" << ctx.hash << '\n' << serialize_config(ctx.config);
}

nlohmann::ordered_json provenance(const Context& ctx, std::string_view command) {
    return {{"tool", kToolVersion}, {"command", command}, {"config_hash", ctx.hash},
            {"config", serialize_config(ctx.config)}};
}

Vocab load_run_vocab(const RunConfig& c) { return load_vocab(c.resolve(c.paths.vocab, "vocab.tsv")); }

std::optional<EncodedCorpus> load_validation(const RunConfig& c, std::size_t vocab_size) {
    const fs::path path = c.resolve(c.paths.valid_corpus, "valid.ids");
    if (!c.paths.valid_corpus.empty() || fs::exists(path)) return load_corpus(path, vocab_size);
    return std::nullopt;
}

FreqTable load_or_count_freq(const RunConfig& c, const EncodedCorpus& train_corpus) {
    const fs::path path = c.resolve(c.paths.freq, "freq.tsv");
    FreqTable freq = (!c.paths.freq.empty() || fs::exists(path)) ? load_freq(path)
                                                                 : count_frequencies(train_corpus, train_corpus.vocab_size);
    if (freq.size() != train_corpus.vocab_size)
        fail(ErrorKind::Data, "frequency table size " + std::to_string(freq.size()) + " != vocab size " +
                                  std::to_string(train_corpus.vocab_size));
    return freq;
}

std::vector<Rule> load_run_rules(const RunConfig& c, std::size_t vocab_size) {
    const fs::path path = c.resolve(c.paths.rules, "rules.tsv");
    if (!c.paths.rules.empty() || fs::exists(path)) return load_rules(path, vocab_size);
    return {};
}

// ---------------------------------------------------------------------------

int cmd_synth(Context& ctx) {
    const RunConfig& c = ctx.config;
    SynthCorpus data;
    if (!c.paths.text.empty()) {
        std::vector<std::vector<std::string>> documents;
        for (const auto& line : io::read_lines(c.paths.text)) documents.push_back(tokenize(line, c.scheme));
        data.vocab = build_vocab(documents, c.min_count);
        data.corpus.vocab_size = data.vocab.size();
        for (const auto& doc : documents) data.corpus.sequences.push_back(encode(data.vocab, doc));
    } else {
        data = generate_zipf_corpus(c.synth);
    }
    auto [train_part, valid_part] = split_corpus(data.corpus, c.validation_fraction);
    save_vocab(data.vocab, c.resolve(c.paths.vocab, "vocab.tsv"));
    save_corpus(train_part, c.resolve(c.paths.corpus, "train.ids"));
    if (!valid_part.sequences.empty()) save_corpus(valid_part, c.resolve(c.paths.valid_corpus, "valid.ids"));
    save_rules(data.rules, c.resolve(c.paths.rules, "rules.tsv"));
    echo_config(ctx, "synth");
    ctx.out << "synth: vocab=" << data.vocab.size() << " train_sequences=" << train_part.sequences.size()
            << " train_tokens=" << train_part.num_tokens() << " valid_sequences=" << valid_part.sequences.size()
            << " rules=" << data.rules.size() << '\n';
    return kExitOk;
}

int cmd_freq(Context& ctx) {
    const RunConfig& c = ctx.config;
    const Vocab vocab = load_run_vocab(c);
    const EncodedCorpus corpus = load_corpus(c.resolve(c.paths.corpus, "train.ids"), vocab.size());
    const FreqTable freq = count_frequencies(corpus, vocab.size());
    save_freq(freq, c.resolve(c.paths.freq, "freq.tsv"), ctx.header);
    echo_config(ctx, "freq");
    ctx.out << "freq: vocab=" << freq.size() << " total=" << freq.total();
    try {
        const ZipfFit fit = fit_zipf(freq);
        ctx.out << " zipf_slope=" << fit.slope << " r_squared=" << fit.r_squared;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) throw;
    }
    ctx.out << '\n';
    return kExitOk;
}

int cmd_weights(Context& ctx) {
    const RunConfig& c = ctx.config;
    const FreqTable freq = load_freq(c.resolve(c.paths.freq, "freq.tsv"));
    const WeightTable table = compute_weights(with_mode(freq, c.train.freq_mode), c.train.alpha, c.train.epsilon,
                                              {c.train.mean_normalized, c.train.w_max});
    save_weights(table, c.resolve(c.paths.weights, "weights.tsv"), ctx.header);
    echo_config(ctx, "weights");
    double lo = table.w_max, hi = 0.0;
    for (std::size_t i = 1; i < table.size(); ++i) {
        lo = std::min(lo, table.weights[i]);
        hi = std::max(hi, table.weights[i]);
    }
    ctx.out << "weights: vocab=" << table.size() << " alpha=" << table.alpha << " min=" << lo << " max=" << hi
            << " w_max=" << table.w_max << '\n';
    return kExitOk;
}

int cmd_gradcheck(Context& ctx) {
    const RunConfig& c = ctx.config;
    const GradcheckReport report = run_gradcheck(c.gradcheck);
    const bool passed = report.max_rel_error() < c.gradcheck_threshold;
    auto j = provenance(ctx, "gradcheck");
    j["loss_max_rel_error"] = report.loss_max_rel_error;
    j["model_max_rel_error"] = report.model_max_rel_error;
    j["logits_checked"] = report.logits_checked;
    j["params_checked"] = report.params_checked;
    j["threshold"] = c.gradcheck_threshold;
    j["passed"] = passed;
    write_json(j, c.resolve(c.paths.gradcheck, "gradcheck.json"));
    echo_config(ctx, "gradcheck");
    ctx.out << "gradcheck: " << (passed ? "PASS" : "FAIL") << " max_rel_error=" << std::scientific
            << std::setprecision(3) << report.max_rel_error() << std::defaultfloat << " (loss "
            << report.loss_max_rel_error << ", model " << report.model_max_rel_error << ")\n";
    return passed ? kExitOk : kExitCheckFailed;
}

int cmd_train(Context& ctx) {
    const RunConfig& c = ctx.config;
    const Vocab vocab = load_run_vocab(c);
    const EncodedCorpus corpus = load_corpus(c.resolve(c.paths.corpus, "train.ids"), vocab.size());
    const auto validation = load_validation(c, vocab.size());
    const FreqTable freq = load_or_count_freq(c, corpus);
    const TrainResult result = train(c.train, corpus, freq, validation ? &*validation : nullptr);

    save_checkpoint(result.params, c.resolve(c.paths.checkpoint, "model.ckpt"), ctx.header);
    auto j = provenance(ctx, "train");
    j["loss"] = to_string(c.train.loss);
    j["history"] = to_json(result.history);
    write_json(j, c.resolve(c.paths.history, "history.json"));
    echo_config(ctx, "train");
    for (std::size_t e = 0; e < result.history.epochs(); ++e)
        ctx.out << "epoch " << e + 1 << ": train_loss=" << result.history.train_loss[e]
                << " val_loss=" << result.history.val_loss[e] << " val_ce=" << result.history.val_ce[e]
                << " seconds=" << result.history.seconds[e] << '\n';
    return kExitOk;
}

int cmd_eval(Context& ctx) {
    const RunConfig& c = ctx.config;
    const Vocab vocab = load_run_vocab(c);
    const ModelParams params = load_checkpoint(c.resolve(c.paths.checkpoint, "model.ckpt"));
    const EncodedCorpus corpus = load_corpus(c.resolve(c.paths.corpus, "train.ids"), vocab.size());
    const auto validation = load_validation(c, vocab.size());
    const FreqTable freq = load_or_count_freq(c, corpus);
    const BucketSpec buckets = make_buckets(freq, c.train.num_buckets);
    const auto rules = load_run_rules(c, vocab.size());
    const EncodedCorpus& target = validation ? *validation : corpus;
    const BucketedMetrics metrics = evaluate(params, target, buckets, rules, c.eval);

    auto j = provenance(ctx, "eval");
    j["evaluated"] = validation ? "validation" : "train";
    j["bucket_boundaries"] = buckets.boundaries;
    j["metrics"] = to_json(metrics);
    write_json(j, c.resolve(c.paths.metrics, "metrics.json"));
    echo_config(ctx, "eval");
    ctx.out << "eval: tokens=" << metrics.tokens_evaluated << " perplexity=" << metrics.perplexity
            << " rare_accuracy=" << metrics.buckets.front().accuracy;
    if (metrics.rule_recall) ctx.out << " rule_recall=" << *metrics.rule_recall;
    ctx.out << '\n';
    return kExitOk;
}

int cmd_compare(Context& ctx) {
    const RunConfig& c = ctx.config;
    EncodedCorpus corpus;
    EncodedCorpus validation;
    std::vector<Rule> rules;
    if (c.compare_synthesize) {
        SynthCorpus data = generate_zipf_corpus(c.synth);
        rules = data.rules;
        std::tie(corpus, validation) = split_corpus(data.corpus, c.validation_fraction);
    } else {
        const Vocab vocab = load_run_vocab(c);
        corpus = load_corpus(c.resolve(c.paths.corpus, "train.ids"), vocab.size());
        if (auto v = load_validation(c, vocab.size())) validation = std::move(*v);
        rules = load_run_rules(c, vocab.size());
    }
    const EncodedCorpus& eval_corpus = validation.sequences.empty() ? corpus : validation;
    const FreqTable freq = count_frequencies(corpus, corpus.vocab_size);
    const BucketSpec buckets = make_buckets(freq, c.train.num_buckets);

    std::vector<Comparison> runs;
    for (const std::uint64_t seed : c.compare_seeds) {
        BucketedMetrics metrics[2];
        double train_ce[2] = {0.0, 0.0};
        for (int arm = 0; arm < 2; ++arm) {
            TrainConfig tc = c.train;
            tc.loss = arm == 0 ? LossKind::Ce : LossKind::Pdl;
            tc.seed = seed;
            const TrainResult result = train(tc, corpus, freq, &eval_corpus);
            metrics[arm] = evaluate(result.params, eval_corpus, buckets, rules, c.eval);
            train_ce[arm] = evaluate(result.params, corpus, buckets, {}, {.num_prompts = 0}).mean_nll;
        }
        Comparison comparison = compare_metrics(metrics[0], metrics[1], seed);
        if (&eval_corpus != &corpus) {
            comparison.ce_generalization_gap = metrics[0].mean_nll - train_ce[0];
            comparison.pdl_generalization_gap = metrics[1].mean_nll - train_ce[1];
        }
        ctx.out << "seed " << seed << ": rare_accuracy ce=" << metrics[0].buckets.front().accuracy
                << " pdl=" << metrics[1].buckets.front().accuracy << " top_accuracy ce="
                << metrics[0].buckets.back().accuracy << " pdl=" << metrics[1].buckets.back().accuracy;
        if (metrics[0].rule_recall && metrics[1].rule_recall)
            ctx.out << " rule_recall ce=" << *metrics[0].rule_recall << " pdl=" << *metrics[1].rule_recall;
        ctx.out << '\n';
        runs.push_back(std::move(comparison));
    }

    const CompareReport report = compare_report(std::move(runs), buckets, serialize_config(c), ctx.hash);
    write_json(to_json(report), c.resolve(c.paths.report, "report.json"));
    write_report_csv(report, c.resolve(c.paths.report_csv, "report.csv"));
    echo_config(ctx, "compare");
    const auto& s = report.summary;
    ctx.out << "compare: runs=" << s.runs << " rare_not_worse=" << s.rare_accuracy_not_worse
            << " rule_recall_not_worse=" << s.rule_recall_not_worse
            << " max_top_accuracy_drop=" << s.max_top_accuracy_drop << '\n';
    return kExitOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::Parse: return kExitParse;
        case ErrorKind::Config: return kExitConfig;
        case ErrorKind::Numeric: return kExitNumeric;
        case ErrorKind::Data:
        case ErrorKind::EmptyCorpus:
        case ErrorKind::UndefinedInformation:
        case ErrorKind::InsufficientData: return kExitData;
    }
    return kExitInternal;
}

int report_error(std::ostream& err, int code, std::string_view kind, const std::string& message) {
    err << "error: code=" << code << " kind=" << kind << " message=" << nlohmann::json(message).dump() << '\n';
    return code;
}

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 ok, 1 internal error, 2 usage, 3 missing or unwritable file, 4 parse error,\n"
    "5 configuration or constraint violation, 6 data error, 7 numeric error, 8 gradient check failed.\n"
    "Output directory: --out-dir, else paths.out_dir, else $PDL_OUT_DIR, else the working directory.";

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power-law decay loss toolkit: synthetic corpora, frequency and weight tables, "
                 "training and CE-vs-PDL comparison",
                 "pdl"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);
    app.fallthrough();

    CommonOptions opts;
    app.add_option("-c,--config", opts.config_path, "Experiment config file (key = value with [sections])");
    app.add_option("--preset", opts.preset, "Built-in config: default, default-compare");
    app.add_option("--set", opts.sets, "Override one key, e.g. --set train.learning_rate=0.05");
    app.add_option("-o,--out-dir", opts.out_dir, "Directory for default input and output files");
    app.add_option("--seed", opts.seed, "Seed for synthesis, training and gradient checks");
    app.add_option("--alpha", opts.alpha, "Decay exponent");
    app.add_option("--epsilon", opts.epsilon, "Smoothing constant");
    app.add_option("--epochs", opts.epochs, "Training epochs");
    app.add_flag("--dump-config", opts.dump_config, "Print the effective config and exit");

    struct Command {
        const char* name;
        const char* help;
        int (*fn)(Context&);
        const char* default_preset;
    };
    const Command commands[] = {
        {"synth", "Write a corpus, vocab and rules (Zipf synthesis, or tokenized paths.text)", cmd_synth, "default"},
        {"freq", "Count token frequencies of the training corpus", cmd_freq, "default"},
        {"weights", "Compute a power-law weight table from a frequency table", cmd_weights, "default"},
        {"gradcheck", "Finite-difference check of the loss and model gradients", cmd_gradcheck, "default"},
        {"train", "Train the n-gram LM with CE or PDL", cmd_train, "default"},
        {"eval", "Bucketed metrics for a checkpoint", cmd_eval, "default"},
        {"compare", "Paired CE/PDL training per seed and a comparison report", cmd_compare, "default-compare"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& cmd : commands) subs.push_back(app.add_subcommand(cmd.name, cmd.help));

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return report_error(err, kExitUsage, "usage", e.what());
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            RunConfig config = effective_config(opts, commands[i].default_preset);
            if (opts.dump_config) {
                out << serialize_config(config);
                return kExitOk;
            }
            Context ctx{config, config_hash(config), {}, out};
            ctx.header = {{"tool", std::string(kToolVersion)}, {"config_hash", ctx.hash}};
            return commands[i].fn(ctx);
        } catch (const Error& e) {
            return report_error(err, exit_code_for(e.kind()), to_string(e.kind()), e.what());
        } catch (const std::exception& e) {
            return report_error(err, kExitInternal, "internal", e.what());
        }
    }
    return report_error(err, kExitUsage, "usage", "no subcommand given");
}

}  // namespace pdl::cli
