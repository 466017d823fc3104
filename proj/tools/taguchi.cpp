#include "taguchi/cli.hpp"

int main(int argc, char** argv) { return taguchi::cli::run_cli(argc, argv); }
