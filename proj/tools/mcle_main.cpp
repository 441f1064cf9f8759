#include "mcle/cli.hpp"

int main(int argc, char** argv) { return mcle::cli::main(argc, argv); }
