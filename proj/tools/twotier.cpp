#include "twotier/cli.hpp"

int main(int argc, char** argv) { return twotier::cli_main(argc, argv); }
