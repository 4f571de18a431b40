#include <string>
#include <vector>

#include "lidint/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lidint::run_cli(args);
}
