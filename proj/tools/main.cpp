#include "cli.hpp"

int main(int argc, char** argv) { return treewave::cli::run(argc, argv); }
