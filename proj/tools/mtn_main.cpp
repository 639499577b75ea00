#include "mtn/pipeline.hpp"

int main(int argc, char** argv) { return mtn::run_cli(argc, argv); }
