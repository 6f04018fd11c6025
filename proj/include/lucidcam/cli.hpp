#pragma once

#include <string>
#include <vector>

namespace lucidcam {

// Runs the command-line tool. `args` is argv-style: args[0] is the program
// name, followed by a subcommand and its flags. Returns the process exit
// code: 0 success, 2 usage error, 3 data/file error, 4 numeric failure.
int run_cli(std::vector<std::string> args);
int run_cli(int argc, const char* const* argv);

}  // namespace lucidcam
