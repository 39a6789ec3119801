#include <iostream>

#include "metricnet/cli.hpp"

int main(int argc, char** argv) {
    return metricnet::cli::main_entry(argc, argv, std::cout, std::cerr);
}
