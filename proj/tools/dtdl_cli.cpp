#include "dtdl/cli.hpp"

int main(int argc, char** argv) { return dtdl::cli::run_cli(argc, argv); }
