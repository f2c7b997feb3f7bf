#include <iostream>
#include <string>
#include <vector>

#include "fairhedge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairhedge::cli::run(args, std::cout, std::cerr);
}
