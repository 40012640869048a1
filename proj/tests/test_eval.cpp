#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "pdl/eval.hpp"
#include "pdl/loss.hpp"
#include "pdl/rng.hpp"

using namespace pdl;
using testing::thrown_kind;

namespace {

SynthCorpus synth(std::uint64_t seed, std::size_t vocab = 100, std::size_t tokens = 6000, std::size_t rules = 5) {
    SynthConfig cfg;
    cfg.vocab_size = vocab;
    cfg.num_tokens = tokens;
    cfg.num_rules = rules;
    cfg.seed = seed;
    return generate_zipf_corpus(cfg);
}

// n=1 model whose logits put `margin` on the recorded successor of each token.
ModelParams successor_model(std::size_t V, const std::vector<TokenId>& successor, double margin) {
    ModelParams p = zero_params(V, 1, static_cast<int>(V));
    p.embedding = Matrix::Identity(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(V));
    for (std::size_t t = 0; t < V; ++t)
        if (successor[t] >= 0) p.projection(static_cast<Eigen::Index>(t), successor[t]) = margin;
    return p;
}

}  // namespace

TEST_CASE("make_buckets log spacing") {
    // Ordinary ids with counts 1, 10, 100, 1000, 10000.
    FreqTable f({0, 5, 5, 0, 1, 10, 100, 1000, 10000});
    BucketSpec b = make_buckets(f, 4);
    REQUIRE(b.boundaries.size() == 3);
    CHECK(b.boundaries[0] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(b.boundaries[1] == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.boundaries[2] == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(b.assignment[4] == 0);
    CHECK(b.assignment[8] == 3);
    for (TokenId s = 0; s < kNumSpecial; ++s) CHECK(b.assignment[s] == -1);
}

TEST_CASE("make_buckets assigns every observed ordinary id") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthCorpus s = synth(seed, 300, 20000, 0);
        FreqTable f = count_frequencies(s.corpus, s.vocab.size());
        BucketSpec b = make_buckets(f, 5);
        CHECK(b == make_buckets(f, 5));
        for (std::size_t i = 1; i < b.boundaries.size(); ++i) CHECK(b.boundaries[i] > b.boundaries[i - 1]);
        std::size_t unassigned = 0;
        TokenId top = kNumSpecial;
        for (std::size_t i = kNumSpecial; i < f.size(); ++i) {
            if (f.counts()[i] > f.counts()[top]) top = static_cast<TokenId>(i);
            if (f.counts()[i] > 0 && b.assignment[i] < 0) ++unassigned;
            if (f.counts()[i] == 0) CHECK(b.assignment[i] == -1);
        }
        CHECK(unassigned == 0);
        CHECK(b.assignment[top] == 4);
    }
}

TEST_CASE("make_buckets errors") {
    FreqTable f({0, 1, 1, 0, 3, 3, 7});
    CHECK(thrown_kind([&] { make_buckets(f, 1); }) == ErrorKind::Config);
    CHECK(thrown_kind([&] { make_buckets(f, 3); }) == ErrorKind::Config);
    CHECK_NOTHROW(make_buckets(f, 2));
}

TEST_CASE("uniform-logit model") {
    SynthCorpus s = synth(2, 96, 5000, 0);
    const std::size_t V = s.vocab.size();
    REQUIRE(V == 100);
    BucketSpec b = make_buckets(count_frequencies(s.corpus, V), 5);
    BucketedMetrics m = evaluate(zero_params(V, 2, 3), s.corpus, b, {}, {.num_prompts = 0});
    for (const auto& bucket : m.buckets) {
        REQUIRE(bucket.tokens > 0);
        CHECK(std::abs(bucket.mean_nll - std::log(100.0)) < 1e-9);
        // Ties go to id 0 (PAD), which is never a target.
        CHECK(bucket.accuracy <= 0.01);
    }
    CHECK(std::abs(m.perplexity - 100.0) < 1e-9);
}

TEST_CASE("memorizing model") {
    // Every token has a single successor in this corpus.
    EncodedCorpus c{{{1, 4, 5, 6, 7, 8, 2}, {1, 4, 5, 6, 7, 8, 2}}, 9};
    std::vector<TokenId> succ(9, -1);
    for (const auto& seq : c.sequences)
        for (std::size_t k = 0; k + 1 < seq.size(); ++k) succ[seq[k]] = seq[k + 1];
    ModelParams p = successor_model(9, succ, 60.0);
    BucketSpec b{2, {1.5}, {-1, -1, -1, -1, 0, 0, 0, 1, 1}};
    std::vector<Rule> rules{{5, 6}};
    BucketedMetrics m = evaluate(p, c, b, rules, {.num_prompts = 0});
    for (const auto& bucket : m.buckets) CHECK(bucket.accuracy == 1.0);
    CHECK(m.perplexity - 1.0 < 1e-12);
    CHECK(m.perplexity >= 1.0);
    REQUIRE(m.rule_recall.has_value());
    CHECK(*m.rule_recall == 1.0);
    CHECK(m.rule_positions == 2);
}

TEST_CASE("evaluate NLL equals ce token mean") {
    Rng rng(51);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthCorpus s = synth(seed);
        const std::size_t V = s.vocab.size();
        ModelParams p = init_params(V, 2, 6, seed);
        for (Eigen::Index i = 0; i < p.projection.size(); ++i) p.projection.data()[i] = rng.uniform(-2, 2);
        BucketSpec b = make_buckets(count_frequencies(s.corpus, V), 5);
        BucketedMetrics m = evaluate(p, s.corpus, b, s.rules, {.num_prompts = 0, .chunk_rows = 97});
        ExampleSet ex = make_examples(s.corpus, 2);
        LossResult ce = ce_loss(forward(p, ex.contexts), ex.targets, Reduction::TokenMean);
        CHECK(std::abs(m.mean_nll - ce.value) <= 1e-12);
        CHECK(m.perplexity == std::exp(m.mean_nll));
        CHECK(m.tokens_evaluated == ce.counted);

        std::size_t bucketed = 0, special = 0;
        for (const auto& bucket : m.buckets) {
            bucketed += bucket.tokens;
            CHECK(bucket.accuracy >= 0.0);
            CHECK(bucket.accuracy <= 1.0);
        }
        for (TokenId y : ex.targets) special += is_special(y);
        CHECK(bucketed + m.tokens_unbucketed == m.tokens_evaluated);
        CHECK(m.tokens_unbucketed == special);
        REQUIRE(m.rule_recall.has_value());
        CHECK(*m.rule_recall >= 0.0);
        CHECK(*m.rule_recall <= 1.0);
        CHECK(m.perplexity >= 1.0);
    }
}

TEST_CASE("evaluate is independent of chunking") {
    SynthCorpus s = synth(9);
    ModelParams p = init_params(s.vocab.size(), 2, 4, 1);
    BucketSpec b = make_buckets(count_frequencies(s.corpus, s.vocab.size()), 5);
    BucketedMetrics a = evaluate(p, s.corpus, b, s.rules, {.num_prompts = 4, .gen_len = 10, .chunk_rows = 1});
    BucketedMetrics c = evaluate(p, s.corpus, b, s.rules, {.num_prompts = 4, .gen_len = 10, .chunk_rows = 4096});
    CHECK(a == c);
}

TEST_CASE("evaluate vocab mismatch") {
    SynthCorpus s = synth(10);
    BucketSpec b = make_buckets(count_frequencies(s.corpus, s.vocab.size()), 5);
    CHECK(thrown_kind([&] { evaluate(zero_params(s.vocab.size() + 1, 2, 2), s.corpus, b); }) == ErrorKind::Data);
}

TEST_CASE("distinct_n") {
    CHECK(distinct_n(std::vector<TokenId>{5, 5, 5, 5}, 1) == 0.25);
    CHECK(distinct_n(std::vector<TokenId>{4, 5, 6, 7}, 1) == 1.0);
    CHECK(distinct_n(std::vector<TokenId>{4, 5, 4, 5}, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(thrown_kind([] { distinct_n(std::vector<TokenId>{4}, 2); }) == ErrorKind::Data);
}

TEST_CASE("distinct_n is relabeling invariant") {
    Rng rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<TokenId> seq(2 + rng.below(60));
        for (auto& t : seq) t = static_cast<TokenId>(rng.below(8));
        std::vector<TokenId> perm(8);
        std::iota(perm.begin(), perm.end(), 100);
        rng.shuffle(std::span(perm));
        std::vector<TokenId> relabeled;
        for (TokenId t : seq) relabeled.push_back(perm[t]);
        for (int n = 1; n <= 2; ++n) CHECK(distinct_n(seq, n) == distinct_n(relabeled, n));
    }
}

TEST_CASE("argmax ties pick the lowest index") {
    CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
    CHECK(argmax(std::vector<double>{0, 0, 0}) == 0);
}

TEST_CASE("greedy_generate") {
    const std::size_t V = 8;
    std::vector<TokenId> succ{-1, 4, -1, -1, 5, 6, 4, -1};
    ModelParams cyc = successor_model(V, succ, 5.0);
    std::vector<TokenId> prompt{1};
    auto out = greedy_generate(cyc, prompt, 7);
    CHECK(out == std::vector<TokenId>{4, 5, 6, 4, 5, 6, 4});
    CHECK(greedy_generate(cyc, prompt, 7) == out);
    CHECK(greedy_generate(cyc, prompt, 0).empty());

    succ[6] = kEos;
    ModelParams stops = successor_model(V, succ, 5.0);
    CHECK(greedy_generate(stops, prompt, 50) == std::vector<TokenId>{4, 5, 6, kEos});

    Rng rng(53);
    ModelParams p = init_params(V, 2, 3, 5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t max_len = rng.below(30);
        CHECK(greedy_generate(p, prompt, max_len).size() <= max_len);
    }
    CHECK(thrown_kind([&] { greedy_generate(p, std::vector<TokenId>{}, 3); }) == ErrorKind::Data);
}

TEST_CASE("distinct-n comes from greedy generations") {
    SynthCorpus s = synth(11);
    ModelParams p = init_params(s.vocab.size(), 2, 4, 1);
    BucketSpec b = make_buckets(count_frequencies(s.corpus, s.vocab.size()), 5);
    BucketedMetrics m = evaluate(p, s.corpus, b, {}, {.num_prompts = 3, .gen_len = 12});
    std::vector<TokenId> all;
    for (std::size_t i = 0; i < 3; ++i) {
        std::span<const TokenId> prompt(s.corpus.sequences[i].data(), 3);
        auto g = greedy_generate(p, prompt, 12);
        all.insert(all.end(), g.begin(), g.end());
    }
    REQUIRE(m.distinct_1.has_value());
    CHECK(*m.distinct_1 == distinct_n(all, 1));
    CHECK(*m.distinct_2 == distinct_n(all, 2));
    CHECK_FALSE(m.rule_recall.has_value());
}
