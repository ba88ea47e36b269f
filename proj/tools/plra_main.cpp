#include "plra/cli.hpp"

int main(int argc, char** argv) {
    return plra::cli::run(argc, argv);
}
