#include <iostream>
#include <string>
#include <vector>

#include "pdl/cli.hpp"

int main(int argc, char** argv) {
    return pdl::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
