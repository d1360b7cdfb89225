#include "multicause/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return multicause::run_cli(argc, argv, std::cout, std::cerr); }
