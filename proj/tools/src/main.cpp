#include <iostream>

#include "sleepstage/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sleepstage::run_cli(args, std::cout, std::cerr);
}
