#include <iostream>

#include "zsslr/cli.hpp"

int main(int argc, char** argv) {
    return zsslr::cli::dispatch(argc, argv, std::cout, std::cerr);
}
