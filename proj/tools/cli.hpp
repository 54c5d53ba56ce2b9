#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snnforge::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;      // bad flags or arguments
inline constexpr int kData = 2;       // malformed or mismatched input data
inline constexpr int kConfig = 3;     // malformed network config or device catalog
inline constexpr int kGeneration = 4; // HDL generation or output IO failed

/// Runs one command line (args excludes the program name). Machine output
/// and tables go to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace snnforge::cli
