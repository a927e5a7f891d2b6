#include "cli.hpp"

int main(int argc, char** argv) { return slamplan::cli::cli_main(argc, argv); }
