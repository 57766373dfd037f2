#include <pmdlab/pmdlab.hpp>

int main(int argc, char** argv) { return pmdlab::cli::cli_main(argc, argv); }
