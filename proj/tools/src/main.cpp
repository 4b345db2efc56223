#include <iostream>

#include "gradtd/cli.hpp"

int main(int argc, char** argv) { return gradtd::cli::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
