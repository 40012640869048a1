#include "io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "pdl/error.hpp"

namespace pdl {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::EmptyCorpus: return "empty_corpus";
        case ErrorKind::UndefinedInformation: return "undefined_information";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

void fail_parse(const std::string& source, std::size_t line, const std::string& message) {
    fail(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + message);
}

}  // namespace pdl

namespace pdl::io {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string format_double(double value) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
    return std::string(buf, static_cast<std::size_t>(n));
}

std::int64_t parse_int(std::string_view text, const std::string& source, std::size_t line) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        fail_parse(source, line, "expected integer, got '" + std::string(text) + "'");
    return value;
}

double parse_double(std::string_view text, const std::string& source, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        fail_parse(source, line, "expected number, got '" + std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::map<std::string, std::string> parse_header(std::string_view line, std::string_view tag,
                                                const std::string& source) {
    const auto fields = split(line, ' ');
    if (fields.size() < 2 || fields[0] != "#" + std::string(tag))
        fail_parse(source, 1, "expected '#" + std::string(tag) + "' header");
    if (fields[1] != "v1") fail_parse(source, 1, "unsupported version '" + std::string(fields[1]) + "'");
    std::map<std::string, std::string> header;
    for (std::size_t i = 2; i < fields.size(); ++i) {
        if (fields[i].empty()) continue;
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos)
            fail_parse(source, 1, "malformed header field '" + std::string(fields[i]) + "'");
        header.emplace(std::string(fields[i].substr(0, eq)), std::string(fields[i].substr(eq + 1)));
    }
    return header;
}

const std::string& require_key(const std::map<std::string, std::string>& header,
                               const std::string& key, const std::string& source) {
    const auto it = header.find(key);
    if (it == header.end()) fail_parse(source, 1, "header is missing '" + key + "'");
    return it->second;
}

}  // namespace pdl::io
