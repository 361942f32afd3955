#include <cstdio>

int main() {
  std::puts("carbonlace: CLI under construction");
  return 0;
}
