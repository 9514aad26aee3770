#include "airware/cli/commands.hpp"

int main(int argc, char** argv) { return airware::cli::run_cli(argc, argv); }
