#pragma once

#include <string>
#include <vector>

namespace disvae {

// Entry point of the command-line tool. `args` includes the program name.
// Returns 0 on success, 1 when a command fails, 2 on a usage error.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, const char* const* argv);

}  // namespace disvae
