#include "pdl/report.hpp"

#include <algorithm>

#include "io.hpp"
#include "pdl/config.hpp"
#include "pdl/error.hpp"

namespace pdl {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& x) { return x ? ordered_json(*x) : ordered_json(nullptr); }

std::optional<double> opt_from(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::optional<double> diff(const std::optional<double>& pdl, const std::optional<double>& ce) {
    if (!pdl || !ce) return std::nullopt;
    return *pdl - *ce;
}

}  // namespace

Comparison compare_metrics(const BucketedMetrics& ce, const BucketedMetrics& pdl, std::uint64_t seed) {
    if (ce.buckets.size() != pdl.buckets.size())
        fail(ErrorKind::Data, "bucket count mismatch: " + std::to_string(ce.buckets.size()) + " vs " +
                                  std::to_string(pdl.buckets.size()));
    if (ce.tokens_evaluated != pdl.tokens_evaluated)
        fail(ErrorKind::Data, "metrics were computed over different token counts");
    Comparison c;
    c.seed = seed;
    c.ce = ce;
    c.pdl = pdl;
    for (std::size_t b = 0; b < ce.buckets.size(); ++b) {
        const auto& x = ce.buckets[b];
        const auto& y = pdl.buckets[b];
        if (x.tokens != y.tokens)
            fail(ErrorKind::Data, "bucket " + std::to_string(b) + " token counts differ");
        c.buckets.push_back({static_cast<int>(b), x.tokens, x.mean_nll, y.mean_nll, y.mean_nll - x.mean_nll,
                             x.accuracy, y.accuracy, y.accuracy - x.accuracy});
    }
    c.rule_recall_delta = diff(pdl.rule_recall, ce.rule_recall);
    c.perplexity_delta = pdl.perplexity - ce.perplexity;
    c.distinct_1_delta = diff(pdl.distinct_1, ce.distinct_1);
    c.distinct_2_delta = diff(pdl.distinct_2, ce.distinct_2);
    return c;
}

CompareSummary summarize(const std::vector<Comparison>& runs) {
    CompareSummary s;
    s.runs = runs.size();
    for (const Comparison& c : runs) {
        if (c.buckets.empty()) continue;
        const bool rare = c.buckets.front().pdl_accuracy >= c.buckets.front().ce_accuracy;
        const bool rule = c.rule_recall_delta ? *c.rule_recall_delta >= 0.0 : true;
        s.rare_accuracy_not_worse += rare ? 1 : 0;
        s.rule_recall_not_worse += rule ? 1 : 0;
        s.both_not_worse += rare && rule ? 1 : 0;
        s.max_top_accuracy_drop = std::max(s.max_top_accuracy_drop, -c.buckets.back().delta_accuracy);
    }
    return s;
}

CompareReport compare_report(std::vector<Comparison> runs, const BucketSpec& buckets,
                             const std::string& config_text, const std::string& hash) {
    CompareReport r;
    r.tool = std::string(kToolVersion);
    r.config_hash = hash;
    r.config = config_text;
    r.bucket_boundaries = buckets.boundaries;
    r.summary = summarize(runs);
    r.runs = std::move(runs);
    return r;
}

ordered_json to_json(const BucketedMetrics& m) {
    ordered_json buckets = ordered_json::array();
    for (std::size_t b = 0; b < m.buckets.size(); ++b) {
        const auto& s = m.buckets[b];
        buckets.push_back({{"bucket", b}, {"tokens", s.tokens}, {"correct", s.correct},
                           {"mean_nll", s.mean_nll}, {"accuracy", s.accuracy}});
    }
    return {{"buckets", buckets},
            {"tokens_evaluated", m.tokens_evaluated},
            {"tokens_unbucketed", m.tokens_unbucketed},
            {"mean_nll", m.mean_nll},
            {"perplexity", m.perplexity},
            {"rule_recall", opt(m.rule_recall)},
            {"rule_positions", m.rule_positions},
            {"distinct_1", opt(m.distinct_1)},
            {"distinct_2", opt(m.distinct_2)}};
}

BucketedMetrics metrics_from_json(const ordered_json& j) {
    BucketedMetrics m;
    for (const auto& b : j.at("buckets"))
        m.buckets.push_back({b.at("tokens").get<std::size_t>(), b.at("correct").get<std::size_t>(),
                             b.at("mean_nll").get<double>(), b.at("accuracy").get<double>()});
    m.tokens_evaluated = j.at("tokens_evaluated").get<std::size_t>();
    m.tokens_unbucketed = j.at("tokens_unbucketed").get<std::size_t>();
    m.mean_nll = j.at("mean_nll").get<double>();
    m.perplexity = j.at("perplexity").get<double>();
    m.rule_recall = opt_from(j.at("rule_recall"));
    m.rule_positions = j.at("rule_positions").get<std::size_t>();
    m.distinct_1 = opt_from(j.at("distinct_1"));
    m.distinct_2 = opt_from(j.at("distinct_2"));
    return m;
}

ordered_json to_json(const TrainHistory& h) {
    ordered_json epochs = ordered_json::array();
    for (std::size_t e = 0; e < h.epochs(); ++e)
        epochs.push_back({{"epoch", e + 1},
                          {"train_loss", h.train_loss[e]},
                          {"val_loss", h.val_loss[e]},
                          {"val_ce", h.val_ce[e]},
                          {"val_rare_accuracy", opt(h.val_rare_accuracy[e])}});
    return {{"epochs", epochs}};
}

ordered_json to_json(const CompareReport& r) {
    ordered_json runs = ordered_json::array();
    for (const Comparison& c : r.runs) {
        ordered_json buckets = ordered_json::array();
        for (const BucketDelta& d : c.buckets)
            buckets.push_back({{"bucket", d.bucket},
                               {"tokens", d.tokens},
                               {"ce_nll", d.ce_nll},
                               {"pdl_nll", d.pdl_nll},
                               {"delta_nll", d.delta_nll},
                               {"ce_accuracy", d.ce_accuracy},
                               {"pdl_accuracy", d.pdl_accuracy},
                               {"delta_accuracy", d.delta_accuracy}});
        runs.push_back({{"seed", c.seed},
                        {"ce", to_json(c.ce)},
                        {"pdl", to_json(c.pdl)},
                        {"bucket_deltas", buckets},
                        {"rule_recall_delta", opt(c.rule_recall_delta)},
                        {"perplexity_delta", c.perplexity_delta},
                        {"distinct_1_delta", opt(c.distinct_1_delta)},
                        {"distinct_2_delta", opt(c.distinct_2_delta)},
                        {"ce_generalization_gap", opt(c.ce_generalization_gap)},
                        {"pdl_generalization_gap", opt(c.pdl_generalization_gap)}});
    }
    const auto& s = r.summary;
    return {{"report_version", r.report_version},
            {"tool", r.tool},
            {"config_hash", r.config_hash},
            {"config", r.config},
            {"bucket_boundaries", r.bucket_boundaries},
            {"runs", runs},
            {"summary",
             {{"runs", s.runs},
              {"rare_accuracy_not_worse", s.rare_accuracy_not_worse},
              {"rule_recall_not_worse", s.rule_recall_not_worse},
              {"both_not_worse", s.both_not_worse},
              {"max_top_accuracy_drop", s.max_top_accuracy_drop}}}};
}

CompareReport report_from_json(const ordered_json& j) {
    CompareReport r;
    r.report_version = j.at("report_version").get<int>();
    if (r.report_version != kReportVersion)
        fail(ErrorKind::Parse, "unsupported report_version " + std::to_string(r.report_version));
    r.tool = j.at("tool").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config").get<std::string>();
    r.bucket_boundaries = j.at("bucket_boundaries").get<std::vector<double>>();
    for (const auto& run : j.at("runs")) {
        Comparison c;
        c.seed = run.at("seed").get<std::uint64_t>();
        c.ce = metrics_from_json(run.at("ce"));
        c.pdl = metrics_from_json(run.at("pdl"));
        for (const auto& d : run.at("bucket_deltas"))
            c.buckets.push_back({d.at("bucket").get<int>(), d.at("tokens").get<std::size_t>(),
                                 d.at("ce_nll").get<double>(), d.at("pdl_nll").get<double>(),
                                 d.at("delta_nll").get<double>(), d.at("ce_accuracy").get<double>(),
                                 d.at("pdl_accuracy").get<double>(), d.at("delta_accuracy").get<double>()});
        c.rule_recall_delta = opt_from(run.at("rule_recall_delta"));
        c.perplexity_delta = run.at("perplexity_delta").get<double>();
        c.distinct_1_delta = opt_from(run.at("distinct_1_delta"));
        c.distinct_2_delta = opt_from(run.at("distinct_2_delta"));
        c.ce_generalization_gap = opt_from(run.at("ce_generalization_gap"));
        c.pdl_generalization_gap = opt_from(run.at("pdl_generalization_gap"));
        r.runs.push_back(std::move(c));
    }
    const auto& s = j.at("summary");
    r.summary.runs = s.at("runs").get<std::size_t>();
    r.summary.rare_accuracy_not_worse = s.at("rare_accuracy_not_worse").get<std::size_t>();
    r.summary.rule_recall_not_worse = s.at("rule_recall_not_worse").get<std::size_t>();
    r.summary.both_not_worse = s.at("both_not_worse").get<std::size_t>();
    r.summary.max_top_accuracy_drop = s.at("max_top_accuracy_drop").get<double>();
    return r;
}

void write_json(const ordered_json& j, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

ordered_json read_json(const std::filesystem::path& path) {
    try {
        return ordered_json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_report_csv(const CompareReport& report, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    out << "seed,bucket,tokens,ce_nll,pdl_nll,delta_nll,ce_accuracy,pdl_accuracy,delta_accuracy\n";
    for (const Comparison& c : report.runs)
        for (const BucketDelta& d : c.buckets)
            out << c.seed << ',' << d.bucket << ',' << d.tokens << ',' << io::format_double(d.ce_nll) << ','
                << io::format_double(d.pdl_nll) << ',' << io::format_double(d.delta_nll) << ','
                << io::format_double(d.ce_accuracy) << ',' << io::format_double(d.pdl_accuracy) << ','
                << io::format_double(d.delta_accuracy) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace pdl
