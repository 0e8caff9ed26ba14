#include "vidinfer/cli.hpp"

int main(int argc, char** argv) { return vidinfer::cli::run(argc, argv); }
