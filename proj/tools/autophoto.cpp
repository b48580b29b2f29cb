#include "autophoto/cli.hpp"

int main(int argc, char** argv) { return autophoto::cli::cli_main(argc, argv); }
