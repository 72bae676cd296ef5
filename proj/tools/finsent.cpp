#include <iostream>

#include "finsent/cli.hpp"

int main(int argc, char** argv) { return finsent::run_cli(argc, argv, std::cout, std::cerr); }
