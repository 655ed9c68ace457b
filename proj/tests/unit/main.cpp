#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>

#include "log.hpp"

int main(int argc, char** argv) {
  // Expected warnings are noise here; PROTOFSM_TEST_LOG=1 brings them back.
  if (!std::getenv("PROTOFSM_TEST_LOG")) protofsm::log::set_min_level(protofsm::log::Level::kError);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
