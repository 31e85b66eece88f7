#include "tmcc/cli.hpp"

int main(int argc, char** argv) {
    return tmcc::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
