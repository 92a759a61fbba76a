#include "tgan/cli.hpp"

int main(int argc, char** argv) { return tgan::cli::run(argc, argv); }
