#include <iostream>

#include "spdcsim/cli.h"

int main(int argc, char** argv) { return spdc::run_cli(argc, argv, std::cout, std::cerr); }
