#include "millpath/cli.hpp"

int main(int argc, char** argv) { return millpath::cli::run_cli(argc, argv); }
