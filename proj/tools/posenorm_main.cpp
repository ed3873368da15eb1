#include "posenorm/pipeline.hpp"

int main(int argc, char** argv) { return posenorm::cli_main(argc, argv); }
