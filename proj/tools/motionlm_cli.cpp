#include "motionlm/cli.hpp"

int main(int argc, char** argv) { return motionlm::run_cli(argc, argv); }
