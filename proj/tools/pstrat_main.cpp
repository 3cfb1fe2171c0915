#include <iostream>
#include <string>
#include <vector>

#include "pstrat/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return pstrat::cli::run(std::move(args), std::cerr);
}
