#include "disvae/cli.hpp"

int main(int argc, char** argv) { return disvae::cli_main(argc, argv); }
