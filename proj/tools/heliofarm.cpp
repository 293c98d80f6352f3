#include <iostream>

#include "heliofarm/cli/cli.hpp"

int main(int argc, char** argv) { return heliofarm::cli::main(argc, argv, std::cout, std::cerr); }
