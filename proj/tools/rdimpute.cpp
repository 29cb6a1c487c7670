#include <iostream>

#include "rdimpute/cli.hpp"

int main(int argc, char** argv) { return rdimpute::cli::run(argc, argv, std::cout, std::cerr); }
