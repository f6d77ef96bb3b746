#include <string>
#include <vector>

#include "stml/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return stml::run_cli(args);
}
