#include <iostream>

#include "loopbreak/cli.hpp"

int main(int argc, char** argv) { return loopbreak::run_cli(argc, argv, std::cout, std::cerr); }
