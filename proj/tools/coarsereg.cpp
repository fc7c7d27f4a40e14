#include "coarsereg/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv)
{
  return coarse::run_cli(argc, argv, std::cout, std::cerr);
}
