#include "arrp/cli.hpp"

int main(int argc, char** argv) { return arrp::cli_main(argc, argv); }
