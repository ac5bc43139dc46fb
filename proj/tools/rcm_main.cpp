#include "rcm/cli.hpp"

int main(int argc, char** argv) { return rcm::cli::dispatch(argc, argv); }
