#include <iostream>

#include "pinch/harness.hpp"

int main(int argc, char** argv) {
  return pinch::harness::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
