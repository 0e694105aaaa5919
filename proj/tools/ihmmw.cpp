#include "ihmm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ihmm::cli_main(args);
}
