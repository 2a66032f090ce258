#include "srcox/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return srcox::run_cli(argc, argv, std::cout, std::cerr); }
