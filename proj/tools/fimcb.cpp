#include <fimcb/cli.hpp>

int main(int argc, char** argv) { return fimcb::cli::run_main(argc, argv); }
