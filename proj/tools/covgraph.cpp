#include "covgraph/cli.hpp"

int main(int argc, char** argv) { return covgraph::cli::dispatch(argc, argv); }
