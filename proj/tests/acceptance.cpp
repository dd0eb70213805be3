#include <cstdio>

int main() {
  std::puts("acceptance: criteria not wired up yet");
  return 2;
}
