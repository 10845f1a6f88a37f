#include "dockeq/cli.hpp"

int main(int argc, char** argv)
{
  return dockeq::cli::run(argc, argv);
}
