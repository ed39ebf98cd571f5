#include <vector>

#include "hsideconv/cli.hpp"

int main(int argc, char** argv) {
  return hsideconv::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
