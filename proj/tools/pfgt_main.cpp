#include "pfgt/cli.hpp"

int main(int argc, char** argv) { return pfgt::cli_main(argc, argv); }
