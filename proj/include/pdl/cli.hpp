#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdl::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitParse = 4;
inline constexpr int kExitConfig = 5;
inline constexpr int kExitData = 6;
inline constexpr int kExitNumeric = 7;
inline constexpr int kExitCheckFailed = 8;

/// Runs the `pdl` command line. `args[0]` is the program name. Errors are
/// reported on `err` as one line: `error: code=<n> kind=<kind> message=<json string>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdl::cli
