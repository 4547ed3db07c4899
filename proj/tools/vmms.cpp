#include "vmms/cli.hpp"

int main(int argc, char** argv) { return vmms::cli::run(argc, argv); }
