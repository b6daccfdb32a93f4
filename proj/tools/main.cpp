#include <iostream>

#include "arbsvrg/harness.hpp"

int main(int argc, char** argv) { return arbsvrg::cli(argc, argv, std::cout, std::cerr); }
