#include "glar/cli_commands.hpp"

int main(int argc, char** argv) { return glar::run_cli(argc, argv); }
