#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hoir::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalid = 1,            // bad arguments, files or config
  kProviderExhausted = 2,  // every provider prompt failed
  kGradientMismatch = 3,   // gradcheck above tolerance
};

inline constexpr double kGradTolerance = 1e-4;

/// Runs one command. `args` excludes the program name. Output goes to
/// `out`, diagnostics and log lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hoir::cli
