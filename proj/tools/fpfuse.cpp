#include "fp/cli.hpp"

int main(int argc, char **argv) { return fp::cli_dispatch(argc, argv); }
