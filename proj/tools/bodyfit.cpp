#include "bodyfit/cli.hpp"

int main(int argc, char** argv) { return bodyfit::run_cli(argc, argv); }
