#include <vector>

#include "mlrhar/cli.hpp"

int main(int argc, char** argv) {
  return mlrhar::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
