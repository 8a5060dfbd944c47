#include <string>
#include <vector>

#include "stdhl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return stdhl::run_cli(args);
}
