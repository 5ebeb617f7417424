#include "bou/cli.hpp"

int main(int argc, char** argv) { return bou::cli_run(argc, argv); }
