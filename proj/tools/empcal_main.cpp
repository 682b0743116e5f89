#include "empcal/cli.hpp"

int main(int argc, char** argv) { return empcal::dispatch(argc, argv); }
