#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace splitsolve::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAuditFailed = 3;

/// Runs one subcommand. args excludes the program name.
auto dispatch(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) -> int;

} // namespace splitsolve::cli
