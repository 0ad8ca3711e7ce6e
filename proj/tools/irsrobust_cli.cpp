#include <cstdio>

int main() {
    std::puts("irsrobust cli placeholder");
    return 0;
}
