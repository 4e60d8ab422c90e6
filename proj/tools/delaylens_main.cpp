#include "delaylens/cli.hpp"

int main(int argc, char** argv) { return delaylens::run_cli(argc, argv); }
