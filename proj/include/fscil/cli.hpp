#pragma once

namespace fscil {

// Entry point behind the command-line binary. Exit codes: 0 success,
// 1 runtime failure, 2 invalid configuration or usage.
int run_cli(int argc, const char* const* argv);

}  // namespace fscil
