#include "rcusum/cli.hpp"

int main(int argc, char** argv) { return rcusum::cli::parse_and_dispatch(argc, argv); }
