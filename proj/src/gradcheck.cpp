#include "pdl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pdl/error.hpp"

namespace pdl {

LossBatch random_loss_batch(Rng& rng, std::size_t max_vocab, std::size_t max_rows) {
    if (max_vocab < 2 || max_rows < 1) fail(ErrorKind::Config, "gradcheck sizes too small");
    const auto vocab = static_cast<Eigen::Index>(2 + rng.below(max_vocab - 1));
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(max_rows));
    LossBatch batch;
    batch.logits.resize(rows, vocab);
    for (Eigen::Index i = 0; i < batch.logits.size(); ++i) batch.logits.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const bool pad = rng.below(10) == 0;
        batch.targets.push_back(pad ? kPad : static_cast<TokenId>(1 + rng.below(static_cast<std::uint64_t>(vocab - 1))));
    }
    batch.reduction = rng.below(2) == 0 ? Reduction::Sum : Reduction::TokenMean;
    return batch;
}

WeightTable random_weight_table(Rng& rng, std::size_t vocab_size) {
    std::vector<std::int64_t> counts(vocab_size);
    for (auto& c : counts) c = static_cast<std::int64_t>(1 + rng.below(20));
    const double alpha = rng.uniform();
    const bool normalized = rng.below(2) == 0;
    const FreqTable freq(std::move(counts));
    const bool probs = rng.below(2) == 0;
    return compute_weights(probs ? normalize(freq) : freq, alpha, kDefaultEpsilon, {normalized, std::nullopt});
}

namespace {

double loss_value(const ModelParams& params, const Contexts& contexts, std::span<const TokenId> targets,
                  const WeightTable& weights, Reduction reduction) {
    return pdl_loss(forward(params, contexts), targets, weights, reduction).value;
}

template <typename Tensor>
void probe_tensor(ModelParams& params, Tensor& values, const Tensor& analytic, const Contexts& contexts,
                  std::span<const TokenId> targets, const WeightTable& weights, Reduction reduction, double h,
                  double& worst) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double original = values.data()[i];
        values.data()[i] = original + h;
        const double up = loss_value(params, contexts, targets, weights, reduction);
        values.data()[i] = original - h;
        const double down = loss_value(params, contexts, targets, weights, reduction);
        values.data()[i] = original;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
}

}  // namespace

double model_grad_check(const ModelParams& params, const Contexts& contexts, std::span<const TokenId> targets,
                        const WeightTable& weights, Reduction reduction, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) fail(ErrorKind::Config, "gradient check step must lie in [1e-7, 1e-3]");
    const LossResult loss = pdl_loss(forward(params, contexts), targets, weights, reduction);
    const ModelGrads grads = backward(params, contexts, loss.grad);
    ModelParams probe = params;
    double worst = 0.0;
    probe_tensor(probe, probe.embedding, grads.embedding, contexts, targets, weights, reduction, h, worst);
    probe_tensor(probe, probe.projection, grads.projection, contexts, targets, weights, reduction, h, worst);
    probe_tensor(probe, probe.bias, grads.bias, contexts, targets, weights, reduction, h, worst);
    return worst;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    if (options.model_vocab <= static_cast<std::size_t>(kNumSpecial))
        fail(ErrorKind::Config, "gradcheck.model_vocab must exceed the special-token count");
    Rng rng(derive_seed(options.seed, 3));
    GradcheckReport report;
    for (std::size_t b = 0; b < options.batches; ++b) {
        const LossBatch batch = random_loss_batch(rng, options.max_vocab, options.max_rows);
        const WeightTable weights = random_weight_table(rng, static_cast<std::size_t>(batch.logits.cols()));
        report.loss_max_rel_error = std::max(report.loss_max_rel_error, grad_check(batch, weights, options.h));
        report.logits_checked += static_cast<std::size_t>(batch.logits.size());
    }

    // Parameters are drawn wider than init_params so that no gradient entry
    // sits near the finite-difference noise floor.
    ModelParams params = zero_params(options.model_vocab, options.model_context, options.model_dim);
    for (Eigen::Index i = 0; i < params.embedding.size(); ++i) params.embedding.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < params.projection.size(); ++i) params.projection.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < params.bias.size(); ++i) params.bias[i] = rng.uniform(-0.5, 0.5);
    Contexts contexts(static_cast<Eigen::Index>(options.model_batch), options.model_context);
    std::vector<TokenId> targets;
    for (Eigen::Index i = 0; i < contexts.size(); ++i)
        contexts.data()[i] = static_cast<TokenId>(1 + rng.below(options.model_vocab - 1));
    for (std::size_t i = 0; i < options.model_batch; ++i)
        targets.push_back(static_cast<TokenId>(1 + rng.below(options.model_vocab - 1)));
    const WeightTable weights = random_weight_table(rng, options.model_vocab);
    report.model_max_rel_error = model_grad_check(params, contexts, targets, weights, Reduction::TokenMean, options.h);
    report.params_checked = static_cast<std::size_t>(params.embedding.size() + params.projection.size() + params.bias.size());
    return report;
}

}  // namespace pdl
