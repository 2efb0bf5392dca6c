#include <iostream>
#include <string>
#include <vector>

#include "pits/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pits::app::run(args, std::cout, std::cerr);
}
