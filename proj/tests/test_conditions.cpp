#include <doctest.h>

#include "cps/conditions.hpp"

using namespace cps;

namespace {

JumpLaw activity(double lhs) {  // symmetric unit jumps at rate = lhs
  return symmetric_two_point(1.0, lhs);
}

SystemParams make(int n, std::vector<double> deltas,
                  std::optional<double> barrier = {}) {
  SystemParams p;
  p.n = n;
  p.deltas = std::move(deltas);
  p.sigmas.assign(n, 1.0);
  p.barrier = barrier;
  return p;
}

}  // namespace

TEST_CASE("unregulated drift-domination condition") {
  const ConditionReport a = check_unregulated(make(3, {1.0, 0.5, 0.0}), activity(0.1));
  CHECK(a.satisfied);
  CHECK(a.threshold == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(a.margin == doctest::Approx(1.0 / 6 - 0.1).epsilon(1e-12));

  const ConditionReport b = check_unregulated(make(3, {1.0, 1.0, 0.0}), activity(0.01));
  CHECK_FALSE(b.satisfied);
  CHECK(b.threshold == 0.0);

  const ConditionReport c = check_unregulated(make(3, {1.0, 0.5, 0.0}), activity(0.0));
  CHECK(c.satisfied);

  CHECK_THROWS_AS(check_unregulated(make(1, {0.0}), activity(0.0)),
                  std::invalid_argument);
}

TEST_CASE("regulated drift-domination condition") {
  const ConditionReport a =
      check_regulated(make(2, {-0.5, -1.0}, 0.0), activity(0.2));
  CHECK(a.satisfied);
  CHECK(a.threshold == doctest::Approx(0.25).epsilon(1e-15));

  const ConditionReport b = check_regulated(make(2, {0.0, -1.0}, 0.0), activity(0.0));
  CHECK_FALSE(b.satisfied);

  const ConditionReport c = check_regulated(make(1, {-1.0}, 0.0), activity(0.5));
  CHECK(c.satisfied);

  CHECK_THROWS_AS(check_regulated(make(2, {-0.5, -1.0}), activity(0.0)),
                  std::invalid_argument);
}

TEST_CASE("infinite regulated condition") {
  CHECK(check_infinite_regulated(activity(0.5), -1.0).satisfied);
  CHECK_FALSE(check_infinite_regulated(activity(1.0), -1.0).satisfied);
  CHECK_FALSE(check_infinite_regulated(activity(0.5), -0.3).satisfied);
}

TEST_CASE("strictness: lhs equal to threshold fails") {
  const ConditionReport eq =
      check_unregulated(make(2, {0.5, 0.0}), activity(0.25));
  CHECK(eq.margin == 0.0);
  CHECK_FALSE(eq.satisfied);
  CHECK(eq.notes.find("outside proven regime") != std::string::npos);
}

TEST_CASE("infinite initial condition") {
  const InitialReport a = check_infinite_initial({}, 1.0, 0.0);
  CHECK(a.in_w);
  CHECK(a.linear_growth);

  const InitialReport b = check_infinite_initial({}, 0.0, 0.0);
  CHECK_FALSE(b.linear_growth);
  CHECK_FALSE(b.in_w);

  const InitialReport c = check_infinite_initial({0.0, 0.0, 0.0}, 0.5, -1.0);
  CHECK(c.in_w);

  CHECK_THROWS_AS(check_infinite_initial({1.0, 0.0}, 1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("standing assumptions") {
  CHECK(check_assumptions(make(3, {1.0, 0.5, 0.0}), activity(0.1), false).valid);

  SystemParams reg = make(2, {-1.0, -1.0}, 0.0);
  CHECK(check_assumptions(reg, activity(0.1), true, 1).valid);

  SystemParams bad = make(2, {1.0, 1.0}, 0.0);
  CHECK_FALSE(check_assumptions(bad, activity(0.1), true, 1).valid);

  SystemParams zero_sigma = make(2, {1.0, 0.0});
  zero_sigma.sigmas[0] = 0.0;
  CHECK_FALSE(check_assumptions(zero_sigma, activity(0.1), false).valid);

  CHECK_FALSE(check_assumptions(make(2, {1.0, 0.0}),
                                two_point_law(1.0, -1.0, 0.6, 1.0), false)
                  .valid);
}
