#include <iostream>

#include "sc2t/cli.hpp"

int main(int argc, char** argv) { return sc2t::cli::run(argc, argv, std::cout, std::cerr); }
