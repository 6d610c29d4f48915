#include "ftsum/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ftsum::cli::run_cli(argc, argv, std::cout, std::cerr); }
