// tqst_main.cpp — Command-line entry point

#include <string>
#include <vector>

#include "tqst/scenario.hpp"

int main(int argc, char** argv) {
    return tqst::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
