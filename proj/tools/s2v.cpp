#include <iostream>

#include "s2v/cli.hpp"

int main(int argc, char** argv) { return s2v::cli::run(argc, argv, std::cout, std::cerr); }
