#include <iostream>

#include "lmr/cli.hpp"

int main(int argc, char** argv) { return lmr::cli::dispatch(argc, argv, std::cout, std::cerr); }
