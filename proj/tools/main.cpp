#include <iostream>

#include "gridflex/cli.hpp"

int main(int argc, char** argv) { return gridflex::cli::run(argc, argv, std::cout, std::cerr); }
