#pragma once

#include <cstdint>

#include "pdl/loss.hpp"
#include "pdl/model.hpp"
#include "pdl/rng.hpp"

namespace pdl {

struct GradcheckOptions {
    std::size_t batches = 100;
    std::size_t max_vocab = 64;
    std::size_t max_rows = 8;
    double h = 1e-5;
    std::uint64_t seed = 1;
    std::size_t model_vocab = 12;
    int model_context = 2;
    int model_dim = 4;
    std::size_t model_batch = 3;
};

struct GradcheckReport {
    double loss_max_rel_error = 0.0;   // d loss / d logits over all random batches
    double model_max_rel_error = 0.0;  // d loss / d params through the tiny model
    std::size_t logits_checked = 0;
    std::size_t params_checked = 0;

    double max_rel_error() const { return std::max(loss_max_rel_error, model_max_rel_error); }
};

/// Random batch with |V| in [2, max_vocab], B in [1, max_rows], logits in
/// [-1, 1], about one PAD target in ten and a random reduction.
LossBatch random_loss_batch(Rng& rng, std::size_t max_vocab, std::size_t max_rows);

/// Power-law weights over random counts in [1, 20] with alpha in [0, 1].
WeightTable random_weight_table(Rng& rng, std::size_t vocab_size);

/// Central-difference check of backward() through forward -> pdl_loss over
/// every parameter, using the relative error of grad_check.
double model_grad_check(const ModelParams& params, const Contexts& contexts, std::span<const TokenId> targets,
                        const WeightTable& weights, Reduction reduction, double h);

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace pdl
