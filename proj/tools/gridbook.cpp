#include <iostream>
#include <vector>

#include "gridbook/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gridbook::cli::run(args, std::cout, std::cerr);
}
