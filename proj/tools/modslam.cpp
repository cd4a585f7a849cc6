#include <iostream>

#include "modslam/cli.hpp"

int main(int argc, char** argv) {
  return modslam::cli_main({argv + 1, argv + argc}, std::cout, std::cerr);
}
