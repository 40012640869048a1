#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pdl/corpus.hpp"

namespace pdl {

enum class FreqMode { Counts, Probabilities };

FreqMode parse_freq_mode(std::string_view name);
std::string_view to_string(FreqMode mode);

/// Unigram occurrence statistics over a reference corpus.
///
/// Counts are always kept; in probabilities mode `probs[i] == counts[i] / total`.
class FreqTable {
public:
    FreqTable() = default;
    /// Counts mode. Throws a data error on negative counts.
    explicit FreqTable(std::vector<std::int64_t> counts);

    std::size_t size() const { return counts_.size(); }
    std::int64_t total() const { return total_; }
    FreqMode mode() const { return mode_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    const std::vector<double>& probs() const { return probs_; }

    std::int64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
    /// freq(t) in the table's mode: the raw count or the probability.
    double value(TokenId id) const;

    friend bool operator==(const FreqTable&, const FreqTable&) = default;

private:
    friend FreqTable normalize(const FreqTable& table);

    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
    FreqMode mode_ = FreqMode::Counts;
    std::vector<double> probs_;
};

/// Tallies every id occurrence, BOS/EOS included.
FreqTable count_frequencies(const EncodedCorpus& corpus, std::size_t vocab_size);

/// Probabilities-mode copy. Throws an empty-corpus error when total is 0.
FreqTable normalize(const FreqTable& table);

/// Returns the table converted to `mode` (counts mode drops the probabilities).
FreqTable with_mode(const FreqTable& table, FreqMode mode);

/// -ln P(id) in nats.
double self_information(const FreqTable& table, TokenId id);

struct ZipfFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t ranks_used = 0;
};

/// OLS of ln(count) on ln(rank) over nonzero-count ordinary ids sorted by
/// descending count (rank 1 first). Special ids are excluded.
ZipfFit fit_zipf(const FreqTable& table);

/// Extra `key=value` fields appended to a file's header line.
using HeaderFields = std::map<std::string, std::string>;

void save_freq(const FreqTable& table, const std::filesystem::path& path,
               const HeaderFields& extra = {});
FreqTable load_freq(const std::filesystem::path& path);

}  // namespace pdl
