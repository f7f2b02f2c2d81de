#include <iostream>

#include "cramkit/cli.hpp"

int main(int argc, char** argv) { return cramkit::cli::run(argc, argv, std::cout, std::cerr); }
