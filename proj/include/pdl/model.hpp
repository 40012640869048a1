#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pdl/corpus.hpp"
#include "pdl/matrix.hpp"
#include "pdl/stats.hpp"

namespace pdl {

/// Fixed-window feedforward LM: logits = [e(c_1) ... e(c_n)] * projection + bias.
struct ModelParams {
    Matrix embedding;   // |V| x d
    Matrix projection;  // (n*d) x |V|
    Vector bias;        // |V|
    int context_size = 0;
    int embed_dim = 0;

    std::size_t vocab_size() const { return static_cast<std::size_t>(bias.size()); }
    bool all_finite() const;
    void validate() const;

    friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Gradients share the parameter layout.
using ModelGrads = ModelParams;

/// B x n matrix of context token ids, oldest first.
using Contexts = Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// (context, target) pairs from sliding a width-n window over every sequence.
/// Each position after BOS is a target; contexts reaching before the start are
/// left-padded with BOS. `previous[i]` is the token right before target i.
struct ExampleSet {
    Contexts contexts;
    std::vector<TokenId> targets;
    std::vector<TokenId> previous;

    std::size_t size() const { return targets.size(); }
    /// Rows `indices` gathered into a new batch.
    ExampleSet select(std::span<const std::size_t> indices) const;
    ExampleSet slice(std::size_t begin, std::size_t end) const;
};

ExampleSet make_examples(const EncodedCorpus& corpus, int context_size);

/// Embedding and projection entries uniform in [-0.05, 0.05]; bias zero.
ModelParams init_params(std::size_t vocab_size, int context_size, int embed_dim, std::uint64_t seed);

/// All-zero parameters with the given shape.
ModelParams zero_params(std::size_t vocab_size, int context_size, int embed_dim);

Matrix forward(const ModelParams& params, const Contexts& contexts);

/// Exact gradients of sum(dlogits .* logits) with respect to every parameter.
ModelGrads backward(const ModelParams& params, const Contexts& contexts, const Matrix& dlogits);

/// params -= learning_rate * grads. Throws a numeric error, leaving params
/// untouched, when any gradient entry is non-finite.
void sgd_step(ModelParams& params, const ModelGrads& grads, double learning_rate);

/// Model checkpoint: `#model v1 vocab_size=.. n=.. d=..` followed by the
/// `#embedding`, `#projection` and `#bias` sections, one matrix row per line.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const HeaderFields& extra = {});
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pdl
