#include "pdl/loss.hpp"

#include <algorithm>
#include <cmath>

#include "pdl/error.hpp"

namespace pdl {

namespace {

double row_max(std::span<const double> row) {
    double m = row[0];
    for (const double z : row) {
        if (!std::isfinite(z)) fail(ErrorKind::Numeric, "non-finite logit");
        m = std::max(m, z);
    }
    return m;
}

}  // namespace

Reduction parse_reduction(std::string_view name) {
    if (name == "sum") return Reduction::Sum;
    if (name == "token_mean") return Reduction::TokenMean;
    fail(ErrorKind::Config, "unknown reduction '" + std::string(name) + "'");
}

std::vector<double> stable_softmax(std::span<const double> logits) {
    if (logits.empty()) fail(ErrorKind::Data, "softmax of an empty row");
    const double m = row_max(logits);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) sum += (p[j] = std::exp(logits[j] - m));
    for (double& x : p) x /= sum;
    return p;
}

double log_softmax_at(std::span<const double> logits, TokenId target) {
    const double m = row_max(logits);
    double sum = 0.0;
    for (const double z : logits) sum += std::exp(z - m);
    return (logits[static_cast<std::size_t>(target)] - m) - std::log(sum);
}

LossResult pdl_loss(const Eigen::Ref<const Matrix>& logits, std::span<const TokenId> targets,
                    const WeightTable& weights, Reduction reduction) {
    const auto rows = static_cast<std::size_t>(logits.rows());
    const auto vocab = static_cast<std::size_t>(logits.cols());
    if (rows == 0) fail(ErrorKind::Data, "empty loss batch");
    if (targets.size() != rows)
        fail(ErrorKind::Data, "batch has " + std::to_string(rows) + " logit rows but " +
                                  std::to_string(targets.size()) + " targets");
    if (weights.size() != vocab)
        fail(ErrorKind::Data, "weight table size " + std::to_string(weights.size()) +
                                  " != vocab size " + std::to_string(vocab));

    LossResult result;
    result.grad = Matrix::Zero(logits.rows(), logits.cols());
    result.per_position.assign(rows, 0.0);
    std::vector<double> p(vocab);
    for (std::size_t k = 0; k < rows; ++k) {
        const TokenId y = targets[k];
        if (y < 0 || static_cast<std::size_t>(y) >= vocab)
            fail(ErrorKind::Data, "target id " + std::to_string(y) + " at position " +
                                      std::to_string(k) + " outside vocab of size " + std::to_string(vocab));
        const std::span<const double> row(logits.row(static_cast<Eigen::Index>(k)).data(), vocab);
        const double m = row_max(row);
        if (y == kPad) continue;
        ++result.counted;

        double sum = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) sum += (p[j] = std::exp(row[j] - m));
        const double w = weights[y];
        result.per_position[k] = -w * ((row[static_cast<std::size_t>(y)] - m) - std::log(sum));
        auto g = result.grad.row(static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < vocab; ++j) g[static_cast<Eigen::Index>(j)] = w * (p[j] / sum);
        g[y] -= w;
    }

    double total = 0.0;
    for (const double x : result.per_position) total += x;
    if (reduction == Reduction::TokenMean) {
        if (result.counted == 0) {
            result.value = 0.0;
        } else {
            const double scale = 1.0 / static_cast<double>(result.counted);
            result.value = total / static_cast<double>(result.counted);
            result.grad *= scale;
        }
    } else {
        result.value = total;
    }
    return result;
}

LossResult pdl_loss(const LossBatch& batch, const WeightTable& weights) {
    return pdl_loss(batch.logits, batch.targets, weights, batch.reduction);
}

LossResult ce_loss(const Eigen::Ref<const Matrix>& logits, std::span<const TokenId> targets,
                   Reduction reduction) {
    return pdl_loss(logits, targets, unit_weights(static_cast<std::size_t>(logits.cols())), reduction);
}

LossResult ce_loss(const LossBatch& batch) { return ce_loss(batch.logits, batch.targets, batch.reduction); }

double grad_check(const LossBatch& batch, const WeightTable& weights, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) fail(ErrorKind::Config, "grad_check step must lie in [1e-7, 1e-3]");
    const LossResult analytic = pdl_loss(batch, weights);
    Matrix probe = batch.logits;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < probe.rows(); ++r) {
        for (Eigen::Index c = 0; c < probe.cols(); ++c) {
            const double original = probe(r, c);
            probe(r, c) = original + h;
            const double up = pdl_loss(probe, batch.targets, weights, batch.reduction).value;
            probe(r, c) = original - h;
            const double down = pdl_loss(probe, batch.targets, weights, batch.reduction).value;
            probe(r, c) = original;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.grad(r, c);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace pdl
