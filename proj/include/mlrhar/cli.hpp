#pragma once

#include <string>
#include <vector>

namespace mlrhar {

// Runs the command-line tool on the given arguments (program name excluded)
// and returns the process exit code: 0 success, 1 computational or I/O
// failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args);

}  // namespace mlrhar
