#include <cstdio>

int main() {
  std::puts("cgolab: subcommands not wired up yet");
  return 2;
}
