#pragma once

#include <iosfwd>

namespace requisites::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kEnvironment = 1;   // I/O failure, port in use
inline constexpr int kInput = 2;         // bad flags, files or evidence
inline constexpr int kInconsistent = 3;  // evidence of probability zero

// Runs the command line. Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace requisites::cli
