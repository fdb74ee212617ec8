// assocnet command-line entry point.

#include "assocnet/cli.hpp"

int main(int argc, char** argv) { return assocnet::cli::run(argc, argv); }
