#include "cugr/cli.hpp"

int main(int argc, char** argv) { return cugr::run_cli(argc, argv); }
