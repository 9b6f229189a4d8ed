#include "doctest.h"
#include "suites/grad_suite.hpp"
#include "suites/property_suite.hpp"

TEST_CASE("gradient suite") {
  for (const auto& c : suites::run_grad_suite()) {
    CAPTURE(c.name);
    CHECK(c.coordinates > 0);
    CHECK(c.max_rel_error <= 1e-4);
  }
}

TEST_CASE("structural properties over random instances") {
  for (const auto& p : suites::run_property_suite(100)) {
    CAPTURE(p.name);
    CHECK(p.instances >= 100);
    CHECK(p.failures == 0);
  }
}
