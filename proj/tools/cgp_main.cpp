#include "cgp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cgp::run_cli(argc, argv, std::cout, std::cerr); }
