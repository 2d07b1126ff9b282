#ifndef GROUPEMO_CLI_HPP
#define GROUPEMO_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace groupemo::cli {

/// Runs one command line (arguments after the program name).
/// Returns 0 on success, 2 for bad input, 1 for anything else.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace groupemo::cli

#endif  // GROUPEMO_CLI_HPP
