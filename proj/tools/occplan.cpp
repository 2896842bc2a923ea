#include "occplan/cli.hpp"

int main(int argc, char** argv) { return occplan::cli_main(argc, argv); }
