#include <string>
#include <vector>

#include "bandmix/cli.hpp"

int main(int argc, char** argv) {
  return bandmix::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
