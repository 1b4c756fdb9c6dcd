#include "fslab/cli/commands.hpp"

int main(int argc, char** argv) { return fslab::cli::run(argc, argv); }
