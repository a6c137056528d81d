#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ilr::cli {

// Runs one subcommand. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilr::cli
