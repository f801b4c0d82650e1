#pragma once

#include <ostream>

namespace ratio_forge {

// Exit codes: 0 ok, 1 usage, 2 input or validation, 3 numeric failure.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInput = 2, kExitNumeric = 3 };

// Runs the command line in-process. argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratio_forge
