#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pdl/corpus.hpp"
#include "pdl/model.hpp"
#include "pdl/stats.hpp"

namespace pdl {

inline constexpr int kDefaultNumBuckets = 5;

/// Log-spaced frequency bands. `boundaries` holds the num_buckets-1 interior
/// thresholds; a count f lands in the bucket equal to the number of
/// boundaries <= f. Bucket 0 is the rare bucket.
struct BucketSpec {
    int num_buckets = 0;
    std::vector<double> boundaries;
    std::vector<int> assignment;  // per id; -1 for special and zero-count ids

    friend bool operator==(const BucketSpec&, const BucketSpec&) = default;
};

/// Throws a configuration error when num_buckets < 2 or the table has fewer
/// than num_buckets distinct nonzero ordinary-token counts.
BucketSpec make_buckets(const FreqTable& freq, int num_buckets);

struct BucketStats {
    std::size_t tokens = 0;
    std::size_t correct = 0;
    double mean_nll = 0.0;  // 0 for an empty bucket
    double accuracy = 0.0;

    friend bool operator==(const BucketStats&, const BucketStats&) = default;
};

/// Unweighted next-token metrics. Targets that are special or have no bucket
/// are counted in `tokens_unbucketed`; every non-PAD target enters mean_nll.
struct BucketedMetrics {
    std::vector<BucketStats> buckets;
    std::size_t tokens_evaluated = 0;
    std::size_t tokens_unbucketed = 0;
    double mean_nll = 0.0;
    double perplexity = 1.0;
    std::optional<double> rule_recall;
    std::size_t rule_positions = 0;
    std::optional<double> distinct_1;
    std::optional<double> distinct_2;

    friend bool operator==(const BucketedMetrics&, const BucketedMetrics&) = default;
};

struct EvalOptions {
    std::size_t num_prompts = 32;  // greedy generations feeding distinct-n; 0 disables
    std::size_t gen_len = 64;
    std::size_t chunk_rows = 512;
};

BucketedMetrics evaluate(const ModelParams& params, const EncodedCorpus& corpus, const BucketSpec& buckets,
                         std::span<const Rule> rules = {}, const EvalOptions& options = {});

/// Unique n-grams over total n-grams.
double distinct_n(std::span<const TokenId> tokens, int n);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Appends argmax tokens to the prompt until EOS (kept) or max_len new
/// tokens; returns only the new tokens.
std::vector<TokenId> greedy_generate(const ModelParams& params, std::span<const TokenId> prompt,
                                     std::size_t max_len);

}  // namespace pdl
