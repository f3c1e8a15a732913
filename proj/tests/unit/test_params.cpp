#include <doctest.h>

#include <set>
#include <string>

#include "avnode/params.hpp"

using namespace avnode;

TEST_CASE("flat order round-trips") {
  ModelParameters p;
  p.fp = {1, 2, 3, 4, 5, 6};
  p.sp = {7, 8, 9, 10, 11, 12};
  const auto v = p.to_array();
  for (std::size_t i = 0; i < kNumParams; ++i) CHECK(v[i] == doctest::Approx(static_cast<double>(i + 1)));
  CHECK(ModelParameters::from_array(v) == p);
}

TEST_CASE("parameter names are unique and ordered") {
  std::set<std::string> names;
  for (std::size_t i = 0; i < kNumParams; ++i) names.emplace(param_name(i));
  CHECK(names.size() == kNumParams);
  CHECK(param_name(0) == "r_min_fp");
  CHECK(param_name(6) == "r_min_sp");
  CHECK(param_name(11) == "tau_d_sp");
  CHECK_THROWS(param_name(12));
}

TEST_CASE("bounds tables") {
  const auto ga = ParameterBounds::ga();
  const auto abc = ParameterBounds::abc();
  const ParamVector ga_lo = {100, 0, 25, 2, 0, 25, 100, 0, 25, 2, 0, 25};
  const ParamVector ga_hi = {1000, 1000, 500, 50, 100, 500, 1000, 1000, 500, 50, 100, 500};
  const ParamVector abc_lo = {30, 0, 10, 0.1, 0, 10, 30, 0, 10, 0.1, 0, 10};
  const ParamVector abc_hi = {1300, 1300, 700, 80, 130, 700, 1300, 1300, 700, 80, 130, 700};
  CHECK(ga.lo == ga_lo);
  CHECK(ga.hi == ga_hi);
  CHECK(abc.lo == abc_lo);
  CHECK(abc.hi == abc_hi);
  // The ABC box contains the GA box.
  for (std::size_t i = 0; i < kNumParams; ++i) {
    CHECK(abc.lo[i] <= ga.lo[i]);
    CHECK(abc.hi[i] >= ga.hi[i]);
  }
}

TEST_CASE("contains is inclusive and clamp projects") {
  const auto b = ParameterBounds::abc();
  CHECK(b.contains(b.lo));
  CHECK(b.contains(b.hi));
  auto v = b.hi;
  v[0] = 1400;
  CHECK_FALSE(b.contains(v));
  v[3] = -1;
  b.clamp(v);
  CHECK(v[0] == 1300);
  CHECK(v[3] == doctest::Approx(0.1));
  CHECK(b.contains(v));
  CHECK(b.range(0) == 1270);
}
