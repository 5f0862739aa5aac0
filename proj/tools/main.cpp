#include "commands.hpp"

int main(int argc, char** argv) { return nlsctl::cli::run(argc, argv); }
