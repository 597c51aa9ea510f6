#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return steinflow::cli::run(argc, argv, std::cout, std::cerr); }
