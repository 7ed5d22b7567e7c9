#include <iostream>

#include "hetplan/cli_app.hpp"

int main(int argc, char** argv) {
    return hetplan::run_cli(argc, argv, std::cout, std::cerr);
}
