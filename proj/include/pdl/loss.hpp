#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "pdl/corpus.hpp"
#include "pdl/matrix.hpp"
#include "pdl/weights.hpp"

namespace pdl {

enum class Reduction { Sum, TokenMean };

Reduction parse_reduction(std::string_view name);

struct LossBatch {
    Matrix logits;  // B x |V|, one row per prediction step
    std::vector<TokenId> targets;
    Reduction reduction = Reduction::TokenMean;
};

struct LossResult {
    double value = 0.0;
    Matrix grad;  // d value / d logits
    std::vector<double> per_position;
    std::size_t counted = 0;  // non-PAD targets
};

/// Max-shifted softmax. Throws a numeric error on non-finite input.
std::vector<double> stable_softmax(std::span<const double> logits);

/// ln softmax(row)[target], computed as (z_t - m) - ln sum exp(z - m).
double log_softmax_at(std::span<const double> logits, TokenId target);

/// Weighted cross-entropy: per_position[k] = -w(y_k) ln p_{y_k}.
///
/// Sum reduction adds the positions; token_mean divides by the number of
/// non-PAD targets (0 when there are none). grad row k is
/// w(y_k) (p - onehot(y_k)), scaled like the value. PAD targets contribute
/// neither loss nor gradient.
LossResult pdl_loss(const Eigen::Ref<const Matrix>& logits, std::span<const TokenId> targets,
                    const WeightTable& weights, Reduction reduction);
LossResult pdl_loss(const LossBatch& batch, const WeightTable& weights);

/// pdl_loss with unit weights.
LossResult ce_loss(const Eigen::Ref<const Matrix>& logits, std::span<const TokenId> targets,
                   Reduction reduction);
LossResult ce_loss(const LossBatch& batch);

/// Max over logit entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// with numeric gradients from central differences of step h.
double grad_check(const LossBatch& batch, const WeightTable& weights, double h);

}  // namespace pdl
