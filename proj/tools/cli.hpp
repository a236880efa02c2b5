#pragma once

#include <iosfwd>

namespace ergocov::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

/// Entry point of the `ergocov` tool: plan, bench, eval, export-plotdata.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ergocov::cli
