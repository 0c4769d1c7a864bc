#include "tailcal/cli.hpp"

int main(int argc, char** argv) { return tailcal::cli::run(argc, argv); }
