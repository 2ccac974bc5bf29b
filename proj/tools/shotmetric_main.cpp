#include <iostream>
#include <string>
#include <vector>

#include "shotmetric/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return shotmetric::cli::run(args, std::cout, std::cerr);
}
