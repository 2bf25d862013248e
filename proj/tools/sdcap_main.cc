#include <iostream>

#include "sdcap/cli.h"
#include "sdcap/logging.h"

int main(int argc, char** argv) {
  sdcap::init_logging();
  return sdcap::run_cli(argc, argv, std::cout, std::cerr);
}
