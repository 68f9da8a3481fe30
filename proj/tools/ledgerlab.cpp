#include <iostream>

#include "ledgerlab/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return ledgerlab::run_cli(args, std::cout, std::cerr);
}
