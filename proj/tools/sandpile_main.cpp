#include <string>
#include <vector>

#include "sandpile/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sandpile::run_cli(args);
}
