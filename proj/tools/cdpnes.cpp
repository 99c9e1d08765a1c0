#include <vector>
#include <string>

#include "cdpnes/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cdpnes::run_cli(args);
}
