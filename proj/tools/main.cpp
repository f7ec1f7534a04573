#include "gamelab/cli.hpp"

int main(int argc, char** argv) { return gamelab::cli::main_entry(argc, argv); }
