#include <iostream>
#include <string>
#include <vector>

#include "nlspn/cli.hpp"

int main(int argc, char** argv) {
  return nlspn::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
