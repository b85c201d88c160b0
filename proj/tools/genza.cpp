#include <iostream>

#include "genza/cli.hpp"

int main(int argc, char** argv) { return genza::cli::run(argc, argv, std::cout, std::cerr); }
