#include "reprl/harness.hpp"

int main(int argc, char** argv) { return reprl::cli_main(argc, argv); }
