#pragma once

// Command-line front end. Subcommands: fit, regress, discriminate, optimize,
// simulate, summarize. Each run writes one JSON document to `out` and, with
// --out-dir, flat CSV tables. Exit codes: 0 success, 1 invalid input or
// usage, 2 numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace trunc_count {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

/// args excludes the program name. Diagnostics and logging go to `err`;
/// the log level comes from TRUNC_COUNT_LOG (quiet, info, debug; default quiet).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trunc_count
