#include <iostream>
#include <string>
#include <vector>

#include "lptsim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return lptsim::run_cli(args, std::cout, std::cerr);
}
