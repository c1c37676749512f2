#include <iostream>

#include "gvmt/cli/commands.h"

int main(int argc, char** argv) { return gvmt::cli::run_cli(argc, argv, std::cout, std::cerr); }
