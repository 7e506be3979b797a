#include <string>
#include <vector>

#include "rainsim/cli.hpp"

int main(int argc, char** argv) {
  return rainsim::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
