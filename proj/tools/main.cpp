#include "cli.hpp"

int main(int argc, char** argv) { return deformreg::cli::run_cli(argc, argv); }
