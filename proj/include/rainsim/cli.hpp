#pragma once

#include <string>
#include <vector>

namespace rainsim {

// Runs one CLI command (args exclude the program name). Exit codes:
// 0 success, 2 config/usage, 3 format, 4 dimension, 5 validation, 6 runtime.
int run_cli(const std::vector<std::string>& args);

}  // namespace rainsim
