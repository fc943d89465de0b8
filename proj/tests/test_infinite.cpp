#include <doctest.h>

#include <cmath>

#include "cps/ergodics.hpp"
#include "cps/infinite.hpp"

using namespace cps;

namespace {

const JumpLaw quarter_activity = symmetric_two_point(0.5, 0.5);  // rate*E|J| = 0.25
const JumpLaw no_jumps = symmetric_two_point(1.0, 0.0);

SystemParams constant_regulated(double delta, double sigma, double b) {
  SystemParams p;
  p.n = 1;
  p.deltas = {delta};
  p.sigmas = {sigma};
  p.barrier = b;
  return p;
}

}  // namespace

TEST_CASE("initial configuration rule") {
  const InfiniteInitial init{{0.0, 0.0, 3.0}, 0.5, -1.0};
  init.validate();
  CHECK(init.position(1) == 0.0);
  CHECK(init.position(3) == 3.0);
  CHECK(init.position(4) == 3.0);               // prefix end dominates 0.5*4-1
  CHECK(init.position(10) == 4.0);              // 0.5*10-1
  CHECK_THROWS_AS(init.position(0), std::invalid_argument);
  const InfiniteInitial decreasing{{1.0, 0.0}, 1.0, 0.0};
  CHECK_THROWS_AS(decreasing.validate(), std::invalid_argument);
}

TEST_CASE("truncation choice: deterministic, prefix-dominated, monotone") {
  // no noise at all: exactly the starts within reach count
  const InfiniteInitial lin{{}, 1.0, 0.0};
  const int k0 = choose_truncation(lin, no_jumps, 0.0, 0.0, 10.0, 2.5, 1e-3, 1, 200);
  CHECK(k0 == 2);  // starts 1, 2 are <= 2.5; start 3 is not

  const InfiniteInitial pre{{0.0, 0.5, 1.0}, 100.0, 0.0};
  const int k1 =
      choose_truncation(pre, quarter_activity, 1.0, 1.0, 1.0, 2.0, 1e-6, 2, 2000);
  CHECK(k1 == 3);  // every later start is hundreds of units above reach

  const InfiniteInitial slow{{}, 0.7, 0.0};
  const int loose =
      choose_truncation(slow, quarter_activity, 1.0, 1.0, 5.0, 0.0, 1e-2, 3, 2000);
  const int tight =
      choose_truncation(slow, quarter_activity, 1.0, 1.0, 5.0, 0.0, 1e-3, 3, 2000);
  CHECK(tight >= loose);

  CHECK_THROWS_AS(
      choose_truncation(InfiniteInitial{{}, 0.0, 0.0}, no_jumps, 1.0, 1.0, 1.0,
                        0.0, 1e-3),
      std::invalid_argument);
}

TEST_CASE("regulated truncation: K=1 reduction and order statistics") {
  const SystemParams p = constant_regulated(-1.0, 1.0, 0.0);
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 3.0;
  c.master_seed = 12;
  c.mode = Mode::regulated;
  const InfiniteInitial init{{0.5}, 1.0, 0.0};

  const RegulatedTruncation one =
      simulate_infinite_regulated(init, 1, p, c, quarter_activity);
  const ParticleNoise noise =
      make_particle_noise(c.master_seed, 0, quarter_activity, c.horizon, c.dt);
  const DominatorPath single =
      simulate_reflected_particle(0.5, -1.0, 1.0, 0.0, noise);
  REQUIRE(one.particles[0].size() == single.values.size());
  for (std::size_t k = 0; k < single.values.size(); ++k)
    CHECK(one.particles[0][k] == single.values[k]);

  const RegulatedTruncation many =
      simulate_infinite_regulated(init, 10, p, c, quarter_activity);
  for (const auto& g : many.gaps) {
    CHECK(g.front() >= 0.0);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] >= g[i - 1]);
  }

  SystemParams bad = constant_regulated(-1.0, 1.0, 0.0);
  bad.n = 2;
  bad.deltas = {-1.0, -2.0};
  bad.sigmas = {1.0, 1.0};
  CHECK_THROWS_AS(simulate_infinite_regulated(init, 3, bad, c, quarter_activity),
                  std::invalid_argument);
}

TEST_CASE("regulated truncation: exchangeable particle marginals") {
  const SystemParams p = constant_regulated(-1.0, 1.0, 0.0);
  const InfiniteInitial equal_starts{{1.0, 1.0}, 1.0, 0.0};
  SimConfig c;
  c.dt = 5e-2;
  c.horizon = 2.0;
  c.mode = Mode::regulated;
  EmpiricalMeasure first, second;
  for (int r = 0; r < 10000; ++r) {
    c.master_seed = derive_seed(77, "replica", r);
    const RegulatedTruncation run =
        simulate_infinite_regulated(equal_starts, 2, p, c, quarter_activity);
    first.samples.push_back({run.particles[0].back()});
    second.samples.push_back({run.particles[1].back()});
  }
  CHECK(ks_marginal(first, 0, second) < 0.02);
}

TEST_CASE("regulated truncation: adding particles only lowers order statistics") {
  const SystemParams p = constant_regulated(-1.0, 1.0, 0.0);
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 2.0;
  c.master_seed = 13;
  c.mode = Mode::regulated;
  const InfiniteInitial init{{}, 0.5, 0.0};
  const RegulatedTruncation small =
      simulate_infinite_regulated(init, 5, p, c, quarter_activity);
  const RegulatedTruncation large =
      simulate_infinite_regulated(init, 8, p, c, quarter_activity);
  for (std::size_t k = 0; k < small.times.size(); ++k)
    for (int j = 0; j < 5; ++j)
      CHECK(large.gaps[k][j] <= small.gaps[k][j] + 1e-12);
}

TEST_CASE("regulated truncation: H dominates every particle") {
  const SystemParams p = constant_regulated(-1.0, 1.0, 0.0);
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 3.0;
  c.master_seed = 14;
  c.mode = Mode::regulated;
  const InfiniteInitial init{{}, 1.0, 0.0};
  const RegulatedTruncation run =
      simulate_infinite_regulated(init, 6, p, c, quarter_activity);
  for (int i = 0; i < 6; ++i) {
    const ParticleNoise noise =
        make_particle_noise(c.master_seed, i, quarter_activity, c.horizon, c.dt);
    const DominatorPath h =
        simulate_H(init.position(i + 1), -1.0, 1.0, 0.0, noise);
    for (std::size_t k = 0; k < h.values.size(); ++k)
      CHECK(run.particles[i][k] <= h.values[k] + 1e-9);
  }
}

TEST_CASE("unregulated truncation: validation and all-active reduction") {
  SystemParams p{3, {0.3, 0.0, -0.3}, {1.0, 1.0, 1.0}, {}, {}, false};
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 2.0;
  c.master_seed = 15;
  const InfiniteInitial init{{0.0, 0.4, 0.8}, 1.0, 0.0};

  CHECK_THROWS_AS(simulate_infinite_unregulated(init, 1, p, 2, c, quarter_activity),
                  std::invalid_argument);
  SystemParams drifting = p;
  drifting.deltas = {0.3, 0.1, -0.3};
  CHECK_THROWS_AS(
      simulate_infinite_unregulated(init, 3, drifting, 1, c, quarter_activity),
      std::invalid_argument);

  const Trajectory finite =
      simulate(p, c, {0.0, 0.4, 0.8}, quarter_activity);
  const UnregulatedTruncation all_active =
      simulate_infinite_unregulated(init, 3, p, 3, c, quarter_activity);
  REQUIRE(all_active.times.size() == finite.records.size());
  for (std::size_t k = 0; k < finite.records.size(); ++k)
    for (int i = 0; i < 3; ++i)
      CHECK(all_active.positions[k][i] == finite.records[k].positions[i]);
  CHECK(all_active.schedule.events.empty());
}

TEST_CASE("unregulated truncation: activation bookkeeping") {
  // deterministic, widely spaced, identical drifts: nobody ever activates
  SystemParams det{2, {-0.2, -0.2}, {0.0, 0.0}, {}, {}, true};
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 2.0;
  c.master_seed = 16;
  const InfiniteInitial spaced{{}, 5.0, 0.0};
  const UnregulatedTruncation quiet =
      simulate_infinite_unregulated(spaced, 6, det, 2, c, no_jumps);
  CHECK(quiet.schedule.events.empty());
  CHECK(quiet.schedule.initial_active == std::vector<int>{0, 1});

  // noisy close-packed system: activations happen, at positive times, near
  // the detection level
  SystemParams noisy{2, {0.5, -0.5}, {1.0, 1.0}, {}, {}, false};
  const InfiniteInitial close{{}, 0.4, 0.0};
  const UnregulatedTruncation busy =
      simulate_infinite_unregulated(close, 10, noisy, 2, c, quarter_activity);
  CHECK(!busy.schedule.events.empty());
  const double tol = c.dt * 0.5 + 4.0 * std::sqrt(c.dt) + 0.5;  // + max jump
  for (const auto& e : busy.schedule.events) {
    CHECK(e.time > 0.0);
    CHECK(e.position <= e.level);
    CHECK(e.level - e.position <= tol);
  }
}

TEST_CASE("tightness diagnostic shapes and deterministic decay") {
  const SystemParams p = constant_regulated(-1.0, 1.0, 0.0);
  SimConfig c;
  c.dt = 2e-2;
  c.horizon = 4.0;
  c.master_seed = 18;
  c.mode = Mode::regulated;
  const InfiniteInitial init{{}, 1.0, 0.0};
  const TightnessReport rep = tightness_diagnostic(
      init, 8, p, c, quarter_activity, {1, 3}, {1.0, 2.0, 4.0}, 60);
  REQUIRE(rep.q95.size() == 2);
  REQUIRE(rep.q95[0].size() == 3);
  for (double r : rep.ratio) CHECK(r >= 1.0);

  CHECK_THROWS_AS(tightness_diagnostic(init, 4, p, c, quarter_activity, {5},
                                       {1.0}, 10),
                  std::invalid_argument);
}
