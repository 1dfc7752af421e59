#include "colltherm/cli/app.hpp"

int main(int argc, char** argv) { return colltherm::cli::main_entry(argc, argv); }
