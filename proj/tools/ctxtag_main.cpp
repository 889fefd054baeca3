#include <iostream>

#include "ctxtag/cli.hpp"

int main(int argc, char** argv) {
  return ctxtag::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
