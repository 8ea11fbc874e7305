#include "iosbc/cli.hpp"

int main(int argc, char** argv) { return iosbc::cli::main(argc, argv); }
