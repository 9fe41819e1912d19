#include "xcorr/cli.hpp"

int main(int argc, char** argv) { return xcorr::cli::run(argc, argv); }
