#include "ablate/cli.hpp"

int main(int argc, char** argv) { return ablate::run_cli(argc, argv); }
