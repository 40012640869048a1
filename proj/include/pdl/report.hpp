#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdl/eval.hpp"
#include "pdl/trainer.hpp"

namespace pdl {

inline constexpr int kReportVersion = 1;

struct BucketDelta {
    int bucket = 0;
    std::size_t tokens = 0;
    double ce_nll = 0.0;
    double pdl_nll = 0.0;
    double delta_nll = 0.0;
    double ce_accuracy = 0.0;
    double pdl_accuracy = 0.0;
    double delta_accuracy = 0.0;

    friend bool operator==(const BucketDelta&, const BucketDelta&) = default;
};

/// One CE-vs-PDL pair evaluated on the same corpus and buckets. Deltas are
/// pdl minus ce.
struct Comparison {
    std::uint64_t seed = 0;
    BucketedMetrics ce;
    BucketedMetrics pdl;
    std::vector<BucketDelta> buckets;
    std::optional<double> rule_recall_delta;
    double perplexity_delta = 0.0;
    std::optional<double> distinct_1_delta;
    std::optional<double> distinct_2_delta;
    // Validation CE minus training CE; an overfitting proxy with no pass/fail meaning.
    std::optional<double> ce_generalization_gap;
    std::optional<double> pdl_generalization_gap;

    friend bool operator==(const Comparison&, const Comparison&) = default;
};

/// Throws a data error when the two metric sets disagree on buckets or token counts.
Comparison compare_metrics(const BucketedMetrics& ce, const BucketedMetrics& pdl, std::uint64_t seed = 0);

struct CompareSummary {
    std::size_t runs = 0;
    std::size_t rare_accuracy_not_worse = 0;
    std::size_t rule_recall_not_worse = 0;
    std::size_t both_not_worse = 0;
    double max_top_accuracy_drop = 0.0;  // max over runs of ce - pdl in the most frequent bucket

    friend bool operator==(const CompareSummary&, const CompareSummary&) = default;
};

CompareSummary summarize(const std::vector<Comparison>& runs);

struct CompareReport {
    int report_version = kReportVersion;
    std::string tool;
    std::string config_hash;
    std::string config;  // effective config, canonical text form
    std::vector<double> bucket_boundaries;
    std::vector<Comparison> runs;
    CompareSummary summary;

    friend bool operator==(const CompareReport&, const CompareReport&) = default;
};

/// compare_report: per-seed comparisons plus their summary.
CompareReport compare_report(std::vector<Comparison> runs, const BucketSpec& buckets,
                             const std::string& config_text, const std::string& hash);

nlohmann::ordered_json to_json(const BucketedMetrics& metrics);
BucketedMetrics metrics_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const TrainHistory& history);
nlohmann::ordered_json to_json(const CompareReport& report);
CompareReport report_from_json(const nlohmann::ordered_json& j);

/// Pretty-printed JSON with a trailing newline.
void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);
nlohmann::ordered_json read_json(const std::filesystem::path& path);

/// Flat per-bucket rows: seed,bucket,tokens,ce_nll,pdl_nll,delta_nll,ce_accuracy,pdl_accuracy,delta_accuracy
void write_report_csv(const CompareReport& report, const std::filesystem::path& path);

}  // namespace pdl
