#include "cli.hpp"

int main(int argc, char** argv) { return mkv::cli::main_entry(argc, argv); }
