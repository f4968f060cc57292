#include <iostream>
#include <string>
#include <vector>

#include "ccpt/cli/app.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ccpt::cli::run(args, std::cout, std::cerr);
}
