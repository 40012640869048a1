#include "pdl/weights.hpp"

#include <cmath>

#include "io.hpp"
#include "pdl/error.hpp"

namespace pdl {

double raw_weight(double freq, double alpha, double epsilon) {
    return std::pow(freq + epsilon, -alpha);
}

double default_w_max(const FreqTable& freq, double alpha, double epsilon) {
    if (freq.mode() == FreqMode::Counts) return raw_weight(1.0, alpha, epsilon);
    if (freq.total() == 0) fail(ErrorKind::EmptyCorpus, "frequency table has total 0");
    return raw_weight(1.0 / static_cast<double>(freq.total()), alpha, epsilon);
}

WeightTable compute_weights(const FreqTable& freq, double alpha, double epsilon,
                            const WeightOptions& options) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        fail(ErrorKind::Config, "alpha must be a finite value >= 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        fail(ErrorKind::Config, "epsilon must be a finite value > 0");
    if (options.w_max && !(*options.w_max > 0.0))
        fail(ErrorKind::Config, "w_max must be > 0");

    WeightTable table;
    table.alpha = alpha;
    table.epsilon = epsilon;
    table.freq_mode = freq.mode();
    table.mean_normalized = options.mean_normalized;
    table.w_max = options.w_max ? *options.w_max : default_w_max(freq, alpha, epsilon);

    table.weights.resize(freq.size());
    for (std::size_t i = 0; i < freq.size(); ++i) {
        const double u = raw_weight(freq.value(static_cast<TokenId>(i)), alpha, epsilon);
        table.weights[i] = std::min(u, table.w_max);
    }

    if (options.mean_normalized && freq.size() > 1) {
        // Neumaier-compensated mean over non-PAD ids.
        double sum = 0.0, carry = 0.0;
        for (std::size_t i = 1; i < table.weights.size(); ++i) {
            const double x = table.weights[i];
            const double t = sum + x;
            carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
            sum = t;
        }
        const double mean = (sum + carry) / static_cast<double>(table.weights.size() - 1);
        if (!(mean > 0.0) || !std::isfinite(mean))
            fail(ErrorKind::Numeric, "weight mean is not a positive finite number");
        for (std::size_t i = 1; i < table.weights.size(); ++i) table.weights[i] /= mean;
        table.w_max /= mean;
    }
    if (!table.weights.empty()) table.weights[kPad] = 0.0;
    return table;
}

WeightTable unit_weights(std::size_t vocab_size) {
    WeightTable table;
    table.alpha = 0.0;
    table.w_max = 1.0;
    table.weights.assign(vocab_size, 1.0);
    if (vocab_size > 0) table.weights[kPad] = 0.0;
    return table;
}

void save_weights(const WeightTable& table, const std::filesystem::path& path,
                  const HeaderFields& extra) {
    auto out = io::open_output(path);
    out << "#weighttable v1 vocab_size=" << table.size() << " alpha=" << io::format_double(table.alpha)
        << " epsilon=" << io::format_double(table.epsilon) << " mode=" << to_string(table.freq_mode)
        << " mean_normalized=" << (table.mean_normalized ? 1 : 0)
        << " w_max=" << io::format_double(table.w_max);
    for (const auto& [key, value] : extra) out << ' ' << key << '=' << value;
    out << '\n';
    for (std::size_t i = 0; i < table.size(); ++i)
        out << i << '\t' << io::format_double(table.weights[i]) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

WeightTable load_weights(const std::filesystem::path& path) {
    const std::string source = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) fail_parse(source, 1, "empty file");
    const auto header = io::parse_header(lines[0], "weighttable", source);
    const auto get = [&](const std::string& key) { return io::require_key(header, key, source); };

    WeightTable table;
    const auto vocab_size = io::parse_int(get("vocab_size"), source, 1);
    table.alpha = io::parse_double(get("alpha"), source, 1);
    table.epsilon = io::parse_double(get("epsilon"), source, 1);
    try {
        table.freq_mode = parse_freq_mode(get("mode"));
    } catch (const Error& e) {
        fail_parse(source, 1, e.what());
    }
    const auto normalized = get("mean_normalized");
    if (normalized != "0" && normalized != "1") fail_parse(source, 1, "mean_normalized must be 0 or 1");
    table.mean_normalized = normalized == "1";
    table.w_max = io::parse_double(get("w_max"), source, 1);
    if (vocab_size < 0) fail_parse(source, 1, "negative vocab_size");
    if (lines.size() != static_cast<std::size_t>(vocab_size) + 1)
        fail_parse(source, lines.size() + 1, "expected " + std::to_string(vocab_size) + " id lines");

    table.weights.resize(static_cast<std::size_t>(vocab_size));
    for (std::size_t i = 0; i < table.weights.size(); ++i) {
        const std::size_t line = i + 2;
        const auto fields = io::split(lines[i + 1], '\t');
        if (fields.size() != 2) fail_parse(source, line, "expected 'id<TAB>weight'");
        if (io::parse_int(fields[0], source, line) != static_cast<std::int64_t>(i))
            fail_parse(source, line, "ids must be dense and in order");
        const double w = io::parse_double(fields[1], source, line);
        if (!(w >= 0.0) || !std::isfinite(w)) fail_parse(source, line, "weight must be finite and >= 0");
        table.weights[i] = w;
    }
    return table;
}

}  // namespace pdl
