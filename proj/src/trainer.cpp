#include "pdl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "pdl/error.hpp"
#include "pdl/loss.hpp"
#include "pdl/rng.hpp"

namespace pdl {

LossKind parse_loss_kind(std::string_view name) {
    if (name == "ce") return LossKind::Ce;
    if (name == "pdl") return LossKind::Pdl;
    fail(ErrorKind::Config, "unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::Ce ? "ce" : "pdl"; }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorKind::Config, "train.learning_rate must be > 0");
    if (epochs < 1) fail(ErrorKind::Config, "train.epochs must be >= 1");
    if (batch_size < 1) fail(ErrorKind::Config, "train.batch_size must be >= 1");
    if (context_size < 1) fail(ErrorKind::Config, "model.context_size must be >= 1");
    if (embed_dim < 1) fail(ErrorKind::Config, "model.embed_dim must be >= 1");
    if (loss == LossKind::Pdl) {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::Config, "pdl.alpha must be >= 0");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorKind::Config, "pdl.epsilon must be > 0");
        if (w_max && !(*w_max > 0.0)) fail(ErrorKind::Config, "pdl.w_max must be > 0");
    }
}

WeightTable training_weights(const TrainConfig& config, const FreqTable& freq) {
    if (config.loss == LossKind::Ce) return unit_weights(freq.size());
    if (config.weight_table_path) return load_weights(*config.weight_table_path);
    return compute_weights(with_mode(freq, config.freq_mode), config.alpha, config.epsilon,
                           {config.mean_normalized, config.w_max});
}

namespace {

struct ValidationScore {
    double objective = 0.0;
    double ce = 0.0;
    std::optional<double> rare_accuracy;
};

ValidationScore score_validation(const ModelParams& params, const ExampleSet& examples,
                                 const EncodedCorpus& corpus, const WeightTable& weights,
                                 const std::optional<BucketSpec>& buckets) {
    constexpr std::size_t kChunk = 512;
    double weighted = 0.0;
    std::size_t counted = 0;
    for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
        const auto end = std::min(examples.size(), begin + kChunk);
        const ExampleSet part = examples.slice(begin, end);
        const LossResult r = pdl_loss(forward(params, part.contexts), part.targets, weights, Reduction::Sum);
        weighted += r.value;
        counted += r.counted;
    }
    ValidationScore score;
    score.objective = counted ? weighted / static_cast<double>(counted) : 0.0;

    BucketSpec spec;
    if (buckets) {
        spec = *buckets;
    } else {
        spec.num_buckets = 1;
        spec.assignment.assign(params.vocab_size(), -1);
    }
    const BucketedMetrics m = evaluate(params, corpus, spec, {}, {.num_prompts = 0});
    score.ce = m.mean_nll;
    if (buckets) score.rare_accuracy = m.buckets.front().accuracy;
    return score;
}

}  // namespace

TrainResult train(const TrainConfig& config, const EncodedCorpus& corpus, const FreqTable& freq,
                  const EncodedCorpus* validation) {
    config.validate();
    if (corpus.sequences.empty()) fail(ErrorKind::Data, "training corpus is empty");
    if (freq.size() != corpus.vocab_size)
        fail(ErrorKind::Data, "frequency table size " + std::to_string(freq.size()) +
                                  " != corpus vocab size " + std::to_string(corpus.vocab_size));
    const EncodedCorpus& val_corpus = validation ? *validation : corpus;
    if (val_corpus.vocab_size != corpus.vocab_size)
        fail(ErrorKind::Data, "validation corpus vocab size differs from the training corpus");

    TrainResult result;
    result.weights = training_weights(config, freq);
    if (result.weights.size() != corpus.vocab_size)
        fail(ErrorKind::Data, "weight table size " + std::to_string(result.weights.size()) +
                                  " != corpus vocab size " + std::to_string(corpus.vocab_size));

    std::optional<BucketSpec> buckets;
    try {
        buckets = make_buckets(freq, config.num_buckets);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Config) throw;
    }

    const ExampleSet examples = make_examples(corpus, config.context_size);
    const ExampleSet val_examples = make_examples(val_corpus, config.context_size);
    result.params = init_params(corpus.vocab_size, config.context_size, config.embed_dim, config.seed);

    std::vector<std::size_t> order(examples.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(config.seed, 1000 + epoch));
        rng.shuffle(std::span(order));

        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const auto end = std::min(order.size(), begin + config.batch_size);
            const ExampleSet batch = examples.select(std::span(order).subspan(begin, end - begin));
            const Matrix logits = forward(result.params, batch.contexts);
            const LossResult loss = pdl_loss(logits, batch.targets, result.weights, Reduction::TokenMean);
            for (const double x : loss.per_position) epoch_loss += x;
            epoch_count += loss.counted;
            const ModelGrads grads = backward(result.params, batch.contexts, loss.grad);
            sgd_step(result.params, grads, config.learning_rate);
        }

        const double train_loss = epoch_count ? epoch_loss / static_cast<double>(epoch_count) : 0.0;
        if (!std::isfinite(train_loss))
            fail(ErrorKind::Numeric, "training loss became non-finite at epoch " + std::to_string(epoch + 1));
        const ValidationScore val = score_validation(result.params, val_examples, val_corpus, result.weights, buckets);
        result.history.train_loss.push_back(train_loss);
        result.history.val_loss.push_back(val.objective);
        result.history.val_ce.push_back(val.ce);
        result.history.val_rare_accuracy.push_back(val.rare_accuracy);
        result.history.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return result;
}

}  // namespace pdl
