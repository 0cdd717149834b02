#include "condisim/cli.hpp"

int main(int argc, char** argv) { return condisim::cli::run(argc, argv); }
