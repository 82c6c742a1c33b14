#include "distla/cli.hpp"

int main(int argc, char** argv) { return distla::cli::run_cli(argc, argv); }
