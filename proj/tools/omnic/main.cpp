#include "commands.hpp"

int main(int argc, char** argv) { return omnic::cli::dispatch(argc, argv); }
