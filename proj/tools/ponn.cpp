#include "ponn/cli.hpp"

int main(int argc, char** argv) { return ponn::cli::run(argc, argv); }
