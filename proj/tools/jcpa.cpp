#include "jcpa/cli.hpp"

int main(int argc, char** argv) { return jcpa::run_cli(argc, argv); }
