#include <iostream>

#include "ratio_forge/cli.hpp"

int main(int argc, char** argv) { return ratio_forge::run_cli(argc, argv, std::cout, std::cerr); }
