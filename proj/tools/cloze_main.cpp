#include <iostream>
#include <string>
#include <vector>

#include "cloze/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cloze::cli::run(args, std::cout, std::cerr);
}
