#include <iostream>

#include "rot/cli.hpp"

int main(int argc, char** argv) {
  return rot::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
