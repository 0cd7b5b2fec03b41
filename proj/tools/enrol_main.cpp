// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "enrol/cli/cli.hpp"

int main(int argc, char** argv) { return enrol::cli::cli_main(argc, argv, std::cout, std::cerr); }
