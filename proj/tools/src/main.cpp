#include <iostream>

#include "groupemo/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return groupemo::cli::run(args, std::cout, std::cerr);
}
