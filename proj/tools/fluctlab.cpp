#include "fluctlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return fluctlab::cli::run(argc, argv, std::cout, std::cerr);
}
