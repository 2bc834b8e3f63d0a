#include <iostream>

#include "ftpeval/cli.hpp"

int main(int argc, char** argv) {
  return ftpeval::run_cli(argc, argv, std::cout, std::cerr);
}
