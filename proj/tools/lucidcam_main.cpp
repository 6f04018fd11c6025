#include "lucidcam/cli.hpp"

int main(int argc, char** argv) {
    return lucidcam::run_cli(argc, argv);
}
