#include "tvae/commands.hpp"

int main(int argc, char** argv) { return tvae::run_cli(argc, argv); }
