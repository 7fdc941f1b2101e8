#include "socpf/cli.hpp"

int main(int argc, char** argv) { return socpf::run(argc, argv); }
