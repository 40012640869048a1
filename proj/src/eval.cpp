#include "pdl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "pdl/error.hpp"
#include "pdl/loss.hpp"

namespace pdl {

namespace {

// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        carry_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace

BucketSpec make_buckets(const FreqTable& freq, int num_buckets) {
    if (num_buckets < 2) fail(ErrorKind::Config, "num_buckets must be >= 2");
    std::set<std::int64_t> distinct;
    for (std::size_t i = kNumSpecial; i < freq.size(); ++i)
        if (freq.counts()[i] > 0) distinct.insert(freq.counts()[i]);
    if (distinct.size() < static_cast<std::size_t>(num_buckets))
        fail(ErrorKind::Config, "only " + std::to_string(distinct.size()) +
                                    " distinct nonzero frequencies for " + std::to_string(num_buckets) +
                                    " buckets");

    const auto lo = static_cast<double>(*distinct.begin());
    const auto hi = static_cast<double>(*distinct.rbegin());
    BucketSpec spec;
    spec.num_buckets = num_buckets;
    for (int i = 1; i < num_buckets; ++i)
        spec.boundaries.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / num_buckets));

    spec.assignment.assign(freq.size(), -1);
    for (std::size_t i = kNumSpecial; i < freq.size(); ++i) {
        const auto c = freq.counts()[i];
        if (c == 0) continue;
        const auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), static_cast<double>(c));
        spec.assignment[i] = static_cast<int>(it - spec.boundaries.begin());
    }
    return spec;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < values.size(); ++j)
        if (values[j] > values[best]) best = j;
    return best;
}

double distinct_n(std::span<const TokenId> tokens, int n) {
    if (n < 1) fail(ErrorKind::Config, "distinct-n order must be >= 1");
    if (tokens.size() < static_cast<std::size_t>(n))
        fail(ErrorKind::Data, "sequence of length " + std::to_string(tokens.size()) + " has no " +
                                  std::to_string(n) + "-grams");
    std::set<std::vector<TokenId>> seen;
    const std::size_t total = tokens.size() - static_cast<std::size_t>(n) + 1;
    for (std::size_t i = 0; i < total; ++i)
        seen.emplace(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                     tokens.begin() + static_cast<std::ptrdiff_t>(i) + n);
    return static_cast<double>(seen.size()) / static_cast<double>(total);
}

std::vector<TokenId> greedy_generate(const ModelParams& params, std::span<const TokenId> prompt,
                                     std::size_t max_len) {
    if (prompt.empty()) fail(ErrorKind::Data, "greedy_generate needs a non-empty prompt");
    std::vector<TokenId> history(prompt.begin(), prompt.end());
    std::vector<TokenId> generated;
    const int n = params.context_size;
    Contexts context(1, n);
    while (generated.size() < max_len) {
        for (int j = 0; j < n; ++j) {
            const auto offset = static_cast<std::ptrdiff_t>(history.size()) - n + j;
            context(0, j) = offset < 0 ? kBos : history[static_cast<std::size_t>(offset)];
        }
        const Matrix logits = forward(params, context);
        const auto next = static_cast<TokenId>(
            argmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.cols()))));
        generated.push_back(next);
        history.push_back(next);
        if (next == kEos) break;
    }
    return generated;
}

BucketedMetrics evaluate(const ModelParams& params, const EncodedCorpus& corpus, const BucketSpec& buckets,
                         std::span<const Rule> rules, const EvalOptions& options) {
    const auto vocab = params.vocab_size();
    if (corpus.vocab_size != vocab || buckets.assignment.size() != vocab)
        fail(ErrorKind::Data, "vocab mismatch: model " + std::to_string(vocab) + ", corpus " +
                                  std::to_string(corpus.vocab_size) + ", buckets " +
                                  std::to_string(buckets.assignment.size()));
    std::unordered_map<TokenId, TokenId> target_of;
    for (const Rule& rule : rules) target_of[rule.trigger] = rule.target;

    const ExampleSet examples = make_examples(corpus, params.context_size);
    BucketedMetrics m;
    m.buckets.assign(static_cast<std::size_t>(buckets.num_buckets), {});
    std::vector<CompensatedSum> bucket_nll(m.buckets.size());
    CompensatedSum total_nll;
    std::size_t rule_hits = 0;

    const std::size_t chunk = std::max<std::size_t>(1, options.chunk_rows);
    for (std::size_t begin = 0; begin < examples.size(); begin += chunk) {
        const std::size_t end = std::min(examples.size(), begin + chunk);
        const ExampleSet part = examples.slice(begin, end);
        const Matrix logits = forward(params, part.contexts);
        for (std::size_t k = 0; k < part.size(); ++k) {
            const TokenId y = part.targets[k];
            if (y == kPad) continue;
            const std::span<const double> row(logits.row(static_cast<Eigen::Index>(k)).data(), vocab);
            const double nll = -log_softmax_at(row, y);
            const auto predicted = static_cast<TokenId>(argmax(row));
            ++m.tokens_evaluated;
            total_nll.add(nll);

            const int b = buckets.assignment[static_cast<std::size_t>(y)];
            if (b < 0) {
                ++m.tokens_unbucketed;
            } else {
                auto& stats = m.buckets[static_cast<std::size_t>(b)];
                ++stats.tokens;
                stats.correct += predicted == y ? 1 : 0;
                bucket_nll[static_cast<std::size_t>(b)].add(nll);
            }
            if (const auto it = target_of.find(part.previous[k]); it != target_of.end()) {
                ++m.rule_positions;
                rule_hits += predicted == it->second ? 1 : 0;
            }
        }
    }

    for (std::size_t b = 0; b < m.buckets.size(); ++b) {
        auto& stats = m.buckets[b];
        if (stats.tokens == 0) continue;
        stats.mean_nll = bucket_nll[b].value() / static_cast<double>(stats.tokens);
        stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(stats.tokens);
    }
    if (m.tokens_evaluated > 0) m.mean_nll = total_nll.value() / static_cast<double>(m.tokens_evaluated);
    m.perplexity = std::exp(m.mean_nll);
    if (!rules.empty() && m.rule_positions > 0)
        m.rule_recall = static_cast<double>(rule_hits) / static_cast<double>(m.rule_positions);

    if (options.num_prompts > 0 && options.gen_len > 0) {
        std::vector<TokenId> generated;
        const std::size_t prompts = std::min(options.num_prompts, corpus.sequences.size());
        const auto prefix = static_cast<std::size_t>(params.context_size) + 1;
        for (std::size_t s = 0; s < prompts; ++s) {
            const auto& seq = corpus.sequences[s];
            const std::span<const TokenId> prompt(seq.data(), std::min(prefix, seq.size()));
            const auto out = greedy_generate(params, prompt, options.gen_len);
            generated.insert(generated.end(), out.begin(), out.end());
        }
        if (!generated.empty()) m.distinct_1 = distinct_n(generated, 1);
        if (generated.size() >= 2) m.distinct_2 = distinct_n(generated, 2);
    }
    return m;
}

}  // namespace pdl
