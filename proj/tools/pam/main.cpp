#include "cli.hpp"

int main(int argc, char** argv) { return pam::cli::run(argc, argv); }
