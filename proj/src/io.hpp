#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pdl::io {

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

// Lines without their trailing '\n'. A final line lacking '\n' is kept.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

std::string format_double(double value);  // 17 significant digits

std::int64_t parse_int(std::string_view text, const std::string& source, std::size_t line);
double parse_double(std::string_view text, const std::string& source, std::size_t line);

std::vector<std::string_view> split(std::string_view text, char sep);

// Parses `#<tag> v1 key=value ...`. Throws a parse error on a different tag,
// version, or a token without '='.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view tag,
                                                const std::string& source);

const std::string& require_key(const std::map<std::string, std::string>& header,
                               const std::string& key, const std::string& source);

}  // namespace pdl::io
