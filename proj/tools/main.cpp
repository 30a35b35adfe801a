#include <iostream>

#include "ptl_cli.hpp"

int main(int argc, char** argv) { return ptl::cli::run(argc, argv, std::cout, std::cerr); }
