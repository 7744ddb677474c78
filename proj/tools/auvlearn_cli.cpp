#include <iostream>

#include "auvlearn/commands.hpp"

int main(int argc, char** argv) { return auvlearn::run_cli(argc, argv, std::cout, std::cerr); }
