#include <iostream>

#include "irqsym/cli.hpp"

int main(int argc, char** argv) { return irqsym::run_cli(argc, argv, std::cout, std::cerr); }
