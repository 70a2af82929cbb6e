#include "heatlens/cli.hpp"

int main(int argc, char** argv) { return heatlens::cli::main(argc, argv); }
