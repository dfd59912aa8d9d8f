#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lptsim {

enum ExitCode { kExitOk = 0, kExitUsage = 2, kExitInput = 3, kExitInvariant = 4 };

// Entry point of the lptsim command line; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lptsim
