#include <iostream>
#include <string>
#include <vector>

#include "air/cli.hpp"
#include "air/runtime.hpp"

int main(int argc, char** argv) {
    air::tune_allocator();
    return air::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
