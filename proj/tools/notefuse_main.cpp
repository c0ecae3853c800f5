// Placeholder entry point; subcommands are added as the library lands.
#include <cstdio>

int main() {
    std::puts("notefuse: no subcommand");
    return 2;
}
