#include "pitchrl/cli.hpp"

int main(int argc, char** argv) { return pitchrl::cli::run_cli(argc, argv); }
