#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace infoprobe::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  ok = 0,
  failure = 1,        // search failure, property violation, unexpected error
  alignment = 2,      // PEMB count or hash does not match the corpus
  input_error = 3,    // malformed file, bad flag or config value
  data_error = 4,     // well-formed input that cannot be probed
};

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace infoprobe::cli
