#include <iostream>

#include "gensheet/cli/cli.hpp"

int main(int argc, char** argv) {
    return gensheet::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
