#include <iostream>
#include <string>
#include <vector>

#include "oulab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return oulab::run_cli(args, std::cout, std::cerr);
}
