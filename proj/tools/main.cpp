#include "slf/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return slf::cli::run(argc, argv, std::cout, std::cerr); }
