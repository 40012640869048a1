#include "pdl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io.hpp"
#include "pdl/error.hpp"

namespace pdl {

FreqMode parse_freq_mode(std::string_view name) {
    if (name == "counts") return FreqMode::Counts;
    if (name == "probabilities") return FreqMode::Probabilities;
    fail(ErrorKind::Config, "unknown frequency mode '" + std::string(name) + "'");
}

std::string_view to_string(FreqMode mode) {
    return mode == FreqMode::Counts ? "counts" : "probabilities";
}

FreqTable::FreqTable(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i] < 0)
            fail(ErrorKind::Data, "negative count for id " + std::to_string(i));
        total_ += counts_[i];
    }
}

double FreqTable::value(TokenId id) const {
    const auto i = static_cast<std::size_t>(id);
    return mode_ == FreqMode::Probabilities ? probs_.at(i) : static_cast<double>(counts_.at(i));
}

FreqTable count_frequencies(const EncodedCorpus& corpus, std::size_t vocab_size) {
    std::vector<std::int64_t> counts(vocab_size, 0);
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const auto& seq = corpus.sequences[s];
        for (std::size_t k = 0; k < seq.size(); ++k) {
            if (seq[k] < 0 || static_cast<std::size_t>(seq[k]) >= vocab_size)
                fail(ErrorKind::Data, "token id " + std::to_string(seq[k]) + " at sequence " +
                                          std::to_string(s) + " position " + std::to_string(k) +
                                          " outside vocab of size " + std::to_string(vocab_size));
            ++counts[static_cast<std::size_t>(seq[k])];
        }
    }
    return FreqTable(std::move(counts));
}

FreqTable normalize(const FreqTable& table) {
    if (table.total() == 0) fail(ErrorKind::EmptyCorpus, "cannot normalize a table with total 0");
    FreqTable out = table;
    out.mode_ = FreqMode::Probabilities;
    out.probs_.resize(table.size());
    const auto total = static_cast<double>(table.total());
    for (std::size_t i = 0; i < table.size(); ++i)
        out.probs_[i] = static_cast<double>(table.counts()[i]) / total;
    return out;
}

FreqTable with_mode(const FreqTable& table, FreqMode mode) {
    if (mode == FreqMode::Probabilities) return normalize(table);
    return FreqTable(table.counts());
}

double self_information(const FreqTable& table, TokenId id) {
    if (table.mode() != FreqMode::Probabilities)
        fail(ErrorKind::Config, "self_information needs a probabilities-mode table");
    if (id < 0 || static_cast<std::size_t>(id) >= table.size())
        fail(ErrorKind::Data, "token id " + std::to_string(id) + " outside table");
    const double p = table.probs()[static_cast<std::size_t>(id)];
    if (!(p > 0.0))
        fail(ErrorKind::UndefinedInformation, "token id " + std::to_string(id) + " has zero probability");
    return -std::log(p);
}

ZipfFit fit_zipf(const FreqTable& table) {
    std::vector<std::int64_t> counts;
    for (std::size_t i = kNumSpecial; i < table.size(); ++i)
        if (table.counts()[i] > 0) counts.push_back(table.counts()[i]);
    if (counts.size() < 2)
        fail(ErrorKind::InsufficientData, "Zipf fit needs at least 2 nonzero ordinary tokens");
    std::sort(counts.begin(), counts.end(), std::greater<>());

    const auto n = static_cast<double>(counts.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        mean_x += std::log(static_cast<double>(r + 1));
        mean_y += std::log(static_cast<double>(counts[r]));
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        const double dx = std::log(static_cast<double>(r + 1)) - mean_x;
        const double dy = std::log(static_cast<double>(counts[r])) - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    ZipfFit fit;
    fit.ranks_used = counts.size();
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    if (syy == 0.0) {
        fit.r_squared = 1.0;  // flat curve, fitted exactly
    } else {
        double ss_res = 0.0;
        for (std::size_t r = 0; r < counts.size(); ++r) {
            const double pred = fit.intercept + fit.slope * std::log(static_cast<double>(r + 1));
            const double e = std::log(static_cast<double>(counts[r])) - pred;
            ss_res += e * e;
        }
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

void save_freq(const FreqTable& table, const std::filesystem::path& path, const HeaderFields& extra) {
    auto out = io::open_output(path);
    out << "#freqtable v1 vocab_size=" << table.size() << " total=" << table.total()
        << " mode=" << to_string(table.mode());
    for (const auto& [key, value] : extra) out << ' ' << key << '=' << value;
    out << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) out << i << '\t' << table.counts()[i] << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

FreqTable load_freq(const std::filesystem::path& path) {
    const std::string source = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) fail_parse(source, 1, "empty file");
    const auto header = io::parse_header(lines[0], "freqtable", source);
    const auto vocab_size = io::parse_int(io::require_key(header, "vocab_size", source), source, 1);
    const auto total = io::parse_int(io::require_key(header, "total", source), source, 1);
    const auto mode_it = header.find("mode");
    const FreqMode mode = mode_it == header.end() ? FreqMode::Counts : parse_freq_mode(mode_it->second);
    if (vocab_size < 0) fail_parse(source, 1, "negative vocab_size");
    if (lines.size() != static_cast<std::size_t>(vocab_size) + 1)
        fail_parse(source, lines.size() + 1, "expected " + std::to_string(vocab_size) + " id lines");

    std::vector<std::int64_t> counts(static_cast<std::size_t>(vocab_size));
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::size_t line = i + 2;
        const auto fields = io::split(lines[i + 1], '\t');
        if (fields.size() != 2) fail_parse(source, line, "expected 'id<TAB>count'");
        if (io::parse_int(fields[0], source, line) != static_cast<std::int64_t>(i))
            fail_parse(source, line, "ids must be dense and in order");
        counts[i] = io::parse_int(fields[1], source, line);
        if (counts[i] < 0) fail_parse(source, line, "negative count");
        sum += counts[i];
    }
    if (sum != total)
        fail_parse(source, 1, "declared total " + std::to_string(total) + " != sum of counts " +
                                  std::to_string(sum));
    return with_mode(FreqTable(std::move(counts)), mode);
}

}  // namespace pdl
