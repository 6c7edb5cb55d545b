#include <iostream>

#include "graphgrade/cli.hpp"

int main(int argc, char** argv) { return graphgrade::run_cli(argc, argv, std::cout, std::cerr); }
