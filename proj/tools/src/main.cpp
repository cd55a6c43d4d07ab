#include <iostream>
#include <string>
#include <vector>

#include "hamdrift_cli/runner.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hamdrift::cli::run_cli(args, std::cout, std::cerr);
}
