#include "cli.hpp"

int main(int argc, char** argv) { return brc::cli::run(argc, argv); }
