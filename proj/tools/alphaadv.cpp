#include <iostream>
#include <string>
#include <vector>

#include "alphaadv/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return alphaadv::cli::run(args, std::cout, std::cerr);
}
