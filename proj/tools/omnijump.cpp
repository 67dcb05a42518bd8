#include "cli_app.hpp"

int main(int argc, char** argv) { return omnijump::cli::run(argc, argv); }
