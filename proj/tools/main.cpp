#include "cli.hpp"

int main(int argc, char** argv) { return dronebuild::cli::run(argc, argv); }
