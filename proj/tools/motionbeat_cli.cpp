#include "motionbeat/cli.hpp"

int main(int argc, char** argv) { return motionbeat::run_cli(argc, argv); }
