#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace empcal {

// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitNumerical = 4,
    kExitIo = 5,
};

// Runs one subcommand. args excludes the program name. Usage text goes to
// out; diagnostics and logs go to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace empcal
