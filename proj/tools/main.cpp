#include "traitlab/cli.hpp"

int main(int argc, char** argv) { return traitlab::run_cli(argc, argv); }
