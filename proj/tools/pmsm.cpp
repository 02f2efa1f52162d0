#include "pmsm/cli.hpp"

int main(int argc, char** argv) { return pmsm::run_cli(argc, argv); }
