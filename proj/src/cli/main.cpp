#include <iostream>

#include "requisites/cli/cli.hpp"

int main(int argc, char** argv) { return requisites::cli::run(argc, argv, std::cout, std::cerr); }
