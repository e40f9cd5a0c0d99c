#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsacr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsageError = 2,    // bad arguments or malformed input files
    kRuntimeError = 3,  // the computation itself failed
};

/// Runs one command line (without the program name). Output goes to `out`,
/// diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rsacr::cli
