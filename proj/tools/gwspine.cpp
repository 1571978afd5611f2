#include "gwspine/cli.hpp"

int main(int argc, char** argv) { return gwspine::cli::run(argc, argv); }
