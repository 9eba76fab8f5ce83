#include "cdpg/harness.hpp"

int main(int argc, char** argv) {
  return cdpg::cli_dispatch(argc, argv);
}
