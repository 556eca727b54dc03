#include <string>
#include <vector>

#include "jellygym/harness.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return jg::harness::run_cli(args);
}
