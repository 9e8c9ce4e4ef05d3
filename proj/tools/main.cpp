#include <iostream>
#include <string>
#include <vector>

#include "gatedflow/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return gatedflow::cli::dispatch(args, std::cout, std::cerr);
}
