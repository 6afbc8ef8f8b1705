#include <iostream>

#include "vlab/experiment.hpp"

int main(int argc, char** argv) { return vlab::run_cli(argc, argv, std::cout, std::cerr); }
