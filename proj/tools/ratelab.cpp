#include "ratelab/cli.hpp"

int main(int argc, char** argv) { return ratelab::cli::run(argc, argv); }
