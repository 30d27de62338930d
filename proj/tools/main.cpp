#include "pso/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pso::run_cli(argc, argv, std::cout, std::cerr); }
