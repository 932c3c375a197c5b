#include <iostream>

#include "grapetrack/cli.hpp"

int main(int argc, char** argv) {
    return grapetrack::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
