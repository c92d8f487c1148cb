#include "pointattn/cli.hpp"

int main(int argc, char** argv) { return pointattn::cli::run(argc, argv); }
