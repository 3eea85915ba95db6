#include <iostream>

#include "ctnet/cli.hpp"

int main(int argc, char** argv) { return ctnet::run_cli(argc, argv, std::cout, std::cerr); }
