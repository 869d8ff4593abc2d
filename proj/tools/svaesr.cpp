#include <iostream>
#include <string>
#include <vector>

#include "svaesr/cli/cli.hpp"

int main(int argc, char** argv) {
  return svaesr::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
