#include <iostream>

#include "lapfield/cli.hpp"

int main(int argc, char** argv) { return lapfield::cli::run(argc, argv, std::cout, std::cerr); }
