#include "enrest/cli.hpp"

int main(int argc, char** argv) { return enrest::cli_run(argc, argv); }
