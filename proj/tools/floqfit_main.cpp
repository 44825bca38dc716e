#include <cstdio>
int main() { std::puts("floqfit"); return 0; }
