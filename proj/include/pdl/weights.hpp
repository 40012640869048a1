#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "pdl/stats.hpp"

namespace pdl {

inline constexpr double kDefaultEpsilon = 1e-8;

struct WeightOptions {
    bool mean_normalized = false;
    std::optional<double> w_max;  // cap on raw weights; derived from the table when unset
};

/// Per-token loss weights w(t) and the parameters that produced them.
///
/// `w_max` is the cap expressed in the scale of `weights`: when mean
/// normalization is on it is the raw cap divided by the same mean, so
/// `weights[i] <= w_max` always holds.
struct WeightTable {
    std::vector<double> weights;
    double alpha = 0.0;
    double epsilon = kDefaultEpsilon;
    FreqMode freq_mode = FreqMode::Probabilities;
    bool mean_normalized = false;
    double w_max = 1.0;

    std::size_t size() const { return weights.size(); }
    double operator[](TokenId id) const { return weights[static_cast<std::size_t>(id)]; }

    friend bool operator==(const WeightTable&, const WeightTable&) = default;
};

/// (freq + epsilon)^-alpha, before any cap or normalization.
double raw_weight(double freq, double alpha, double epsilon);

/// Weight of the rarest observable token: one count, or probability 1/total.
double default_w_max(const FreqTable& freq, double alpha, double epsilon);

/// Power-law decay weights over a frequency table.
///
/// Raw weights use the table's mode value, are clamped to the cap, optionally
/// divided by their mean over non-PAD ids, and PAD is set to 0 last.
WeightTable compute_weights(const FreqTable& freq, double alpha, double epsilon,
                            const WeightOptions& options = {});

/// All-ones table (PAD = 0); the weighting that turns PDL into plain CE.
WeightTable unit_weights(std::size_t vocab_size);

void save_weights(const WeightTable& table, const std::filesystem::path& path,
                  const HeaderFields& extra = {});
WeightTable load_weights(const std::filesystem::path& path);

}  // namespace pdl
