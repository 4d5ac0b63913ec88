#include "clab_tools/cli.hpp"

int main(int argc, char** argv) { return clab::tools::run(argc, argv); }
