#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdl {

enum class ErrorKind {
    Config,
    Data,
    Parse,
    Numeric,
    EmptyCorpus,
    UndefinedInformation,
    InsufficientData,
    Io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

[[noreturn]] void fail_parse(const std::string& source, std::size_t line,
                             const std::string& message);

}  // namespace pdl
