#include "figurelink/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return figurelink::cli::run(argc, argv, std::cout, std::cerr); }
