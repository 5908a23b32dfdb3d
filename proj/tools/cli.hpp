#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adbcr::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 when every requested artifact was written, 2 for usage and
// configuration errors, 1 for data, training and I/O failures.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point shared by the executable and the in-process tests. `args`
// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adbcr::cli
