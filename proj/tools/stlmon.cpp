#include <iostream>

#include "stlmon/cli.hpp"

int main(int argc, char** argv) { return stlmon::cli::run(argc, argv, std::cout, std::cerr); }
