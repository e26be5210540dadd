#include "tierrank/cli.hpp"

int main(int argc, char** argv) { return tierrank::run_cli(argc, argv); }
