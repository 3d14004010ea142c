#include "codegrag/cli.hpp"

int main(int argc, char** argv) { return codegrag::cli::dispatch(argc, argv); }
