#pragma once

// Independent recomputation of power-law decay weights in 50-digit binary
// floating point. Shares no code with the library: frequencies are rebuilt
// from the integer counts and every step is done in high precision.

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

struct WeightQuery {
    std::vector<std::int64_t> counts;
    bool probabilities = true;
    double alpha = 1.0;
    double epsilon = 1e-8;
    bool mean_normalized = false;
    std::optional<double> w_max;
};

inline std::vector<double> weights(const WeightQuery& q) {
    Big total = 0;
    for (auto c : q.counts) total += c;
    const Big eps(q.epsilon), alpha(q.alpha);
    auto w = [&](const Big& f) { return boost::multiprecision::pow(f + eps, -alpha); };

    const Big cap = q.w_max ? Big(*q.w_max) : (q.probabilities ? w(Big(1) / total) : w(Big(1)));
    std::vector<Big> out;
    for (auto c : q.counts) {
        const Big f = q.probabilities ? Big(c) / total : Big(c);
        const Big x = w(f);
        out.push_back(x < cap ? x : cap);
    }
    if (q.mean_normalized && out.size() > 1) {
        Big mean = 0;
        for (std::size_t i = 1; i < out.size(); ++i) mean += out[i];
        mean /= Big(out.size() - 1);
        for (std::size_t i = 1; i < out.size(); ++i) out[i] /= mean;
    }
    if (!out.empty()) out[0] = 0;

    std::vector<double> result;
    for (const Big& x : out) result.push_back(static_cast<double>(x));
    return result;
}

}  // namespace oracle
