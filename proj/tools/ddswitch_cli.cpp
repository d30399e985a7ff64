#include "ddswitch/cli.hpp"

int main(int argc, char** argv) { return ddswitch::cli::dispatch(argc, argv); }
