#include "nllvm/cli.hpp"

int main(int argc, char** argv)
{
  return nllvm::run_cli(argc, argv);
}
