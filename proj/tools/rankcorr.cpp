#include "rankcorr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rankcorr::cli::run(argc, argv, std::cout, std::cerr); }
