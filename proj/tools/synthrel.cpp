#include "synthrel/cli/app.hpp"

int main(int argc, char** argv) { return synthrel::cli::run_cli(argc, argv); }
