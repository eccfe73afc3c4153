#include <iostream>

#include "dimco/cli.hpp"

int main(int argc, char** argv) { return dimco::cli::dispatch(argc, argv, std::cout, std::cerr); }
