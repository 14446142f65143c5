#include "adaptcp/cli.hpp"

int main(int argc, char** argv) { return adaptcp::cli::run(argc, argv); }
