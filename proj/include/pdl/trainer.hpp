#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdl/corpus.hpp"
#include "pdl/eval.hpp"
#include "pdl/model.hpp"
#include "pdl/weights.hpp"

namespace pdl {

enum class LossKind { Ce, Pdl };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct TrainConfig {
    LossKind loss = LossKind::Pdl;
    double alpha = 1.0;
    double epsilon = kDefaultEpsilon;
    FreqMode freq_mode = FreqMode::Probabilities;
    bool mean_normalized = true;
    std::optional<double> w_max;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::size_t epochs = 5;
    std::uint64_t seed = 1;
    int context_size = 2;
    int embed_dim = 16;
    std::optional<std::string> weight_table_path;
    int num_buckets = kDefaultNumBuckets;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // configured objective, token mean over the epoch
    std::vector<double> val_loss;    // configured objective on the validation set
    std::vector<double> val_ce;      // unweighted CE on the validation set
    std::vector<std::optional<double>> val_rare_accuracy;  // empty when buckets cannot be formed
    std::vector<double> seconds;

    std::size_t epochs() const { return train_loss.size(); }
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
    WeightTable weights;
};

/// Loss weights for a config: unit weights for CE, otherwise loaded from
/// weight_table_path or computed from `freq`.
WeightTable training_weights(const TrainConfig& config, const FreqTable& freq);

/// Per-epoch deterministic shuffling SGD over sliding-window examples.
///
/// `validation` defaults to the training corpus. The rare-bucket accuracy uses
/// buckets built from `freq` with config.num_buckets.
TrainResult train(const TrainConfig& config, const EncodedCorpus& corpus, const FreqTable& freq,
                  const EncodedCorpus* validation = nullptr);

}  // namespace pdl
