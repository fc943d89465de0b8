#include <doctest.h>

#include <cmath>

#include "cps/gaps.hpp"
#include "cps/system.hpp"

using namespace cps;

namespace {

SystemParams det_params(int n, std::vector<double> deltas,
                        std::optional<double> barrier = {}) {
  SystemParams p;
  p.n = n;
  p.deltas = std::move(deltas);
  p.sigmas.assign(n, 0.0);
  p.barrier = barrier;
  p.allow_zero_sigma = true;
  return p;
}

const JumpLaw no_jumps = symmetric_two_point(1.0, 0.0);

}  // namespace

TEST_CASE("rank assignment with ties") {
  CHECK(rank_assignment({3, 1, 2}, {}) == std::vector<int>{2, 0, 1});
  CHECK(rank_assignment({1, 1, 2}, {}) == std::vector<int>{0, 1, 2});
  // all equal: ranks follow tie_order
  CHECK(rank_assignment({5, 5, 5}, {2, 0, 1}) == std::vector<int>{1, 2, 0});
  CHECK(rank_assignment({5, 5, 5}, {}) == std::vector<int>{0, 1, 2});
}

TEST_CASE("parameter validation") {
  SystemParams p = det_params(2, {0.0, 0.0});
  p.allow_zero_sigma = false;
  CHECK_THROWS_AS(p.validate(Mode::unregulated), std::invalid_argument);
  p.allow_zero_sigma = true;
  CHECK_NOTHROW(p.validate(Mode::unregulated));
  CHECK_THROWS_AS(p.validate(Mode::regulated), std::invalid_argument);
  p.tie_order = {0, 0};
  CHECK_THROWS_AS(p.validate(Mode::unregulated), std::invalid_argument);
}

TEST_CASE("jump application at the barrier") {
  SystemParams p = det_params(1, {0.0}, 0.0);
  SystemState s;
  s.positions = {0.5};
  s.regulation = {0.0};
  apply_jump(s, 0, -2.0, p, Mode::regulated);
  CHECK(s.positions[0] == 0.0);
  CHECK(s.regulation[0] == doctest::Approx(1.5).epsilon(1e-15));

  s.positions = {0.5};
  s.regulation = {0.0};
  apply_jump(s, 0, 1.0, p, Mode::regulated);
  CHECK(s.positions[0] == 1.5);
  CHECK(s.regulation[0] == 0.0);

  s.positions = {0.5};
  s.regulation = {0.0};
  apply_jump(s, 0, -0.5, p, Mode::regulated);
  CHECK(s.positions[0] == 0.0);
  CHECK(s.regulation[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("drift-only golden path: gap closes linearly") {
  SystemParams p = det_params(2, {1.0, 0.0});
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = 2.0;
  c.master_seed = 1;
  const Trajectory traj = simulate(p, c, {0.0, 1.0}, no_jumps);
  for (const StateRecord& rec : traj.records) {
    const double expect = std::max(1.0 - rec.t, 0.0);
    CHECK(std::abs(rec.gaps[0] - expect) <= 1e-12);
    CHECK(rec.ordered[0] <= rec.ordered[1]);
  }
}

TEST_CASE("drift-only golden path: reflected particle") {
  SystemParams p = det_params(1, {-1.0}, 0.5);
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = 2.0;
  c.master_seed = 1;
  c.mode = Mode::regulated;
  const Trajectory traj = simulate(p, c, {1.5}, no_jumps);
  for (const StateRecord& rec : traj.records)
    CHECK(std::abs(rec.positions[0] - (0.5 + std::max(1.0 - rec.t, 0.0))) <= 1e-12);
}

TEST_CASE("constant trajectory under zero dynamics") {
  SystemParams p = det_params(3, {0.0, 0.0, 0.0});
  SimConfig c;
  c.dt = 0.01;
  c.horizon = 1.0;
  c.master_seed = 1;
  const Trajectory traj = simulate(p, c, {0.0, 0.5, 2.0}, no_jumps);
  for (const StateRecord& rec : traj.records) {
    CHECK(rec.positions[0] == 0.0);
    CHECK(rec.positions[1] == 0.5);
    CHECK(rec.positions[2] == 2.0);
  }
}

TEST_CASE("step additivity when ranks are frozen") {
  SystemParams p = det_params(2, {0.3, -0.2});
  SystemState one, two;
  one.positions = two.positions = {0.0, 1.0};
  one.regulation = two.regulation = {0.0, 0.0};
  one.pair_reflection = two.pair_reflection = {0.0};
  one.barrier_reflection = two.barrier_reflection = {0.0, 0.0};
  JumpLaw law = no_jumps;
  std::vector<NoiseStream> na{{1, 0, law, 1.0}, {1, 1, law, 1.0}};
  std::vector<NoiseStream> nb{{1, 0, law, 1.0}, {1, 1, law, 1.0}};
  step_continuous(one, p, na, 0.5, Mode::unregulated);
  step_continuous(two, p, nb, 0.25, Mode::unregulated);
  step_continuous(two, p, nb, 0.25, Mode::unregulated);
  CHECK(std::abs(one.positions[0] - two.positions[0]) <= 1e-12);
  CHECK(std::abs(one.positions[1] - two.positions[1]) <= 1e-12);
}

TEST_CASE("simulation input validation") {
  SystemParams p = det_params(2, {0.0, 0.0}, 0.0);
  SimConfig c;
  c.horizon = 1.0;
  c.master_seed = 1;
  CHECK_THROWS_AS(simulate(p, c, {1.0, 0.0}, no_jumps), std::invalid_argument);
  c.mode = Mode::regulated;
  CHECK_THROWS_AS(simulate(p, c, {-1.0, 0.0}, no_jumps), std::invalid_argument);
  c.mode = Mode::unregulated;
  c.dt = 2.0;
  CHECK_THROWS_AS(simulate(p, c, {0.0, 1.0}, no_jumps), std::invalid_argument);
  c.dt = 0.1;
  c.output_grid = {2.0};
  CHECK_THROWS_AS(simulate(p, c, {0.0, 1.0}, no_jumps), std::invalid_argument);
}

TEST_CASE("same seed reproduces the trajectory exactly") {
  SystemParams p{3, {0.5, 0.0, -0.5}, {1.0, 1.0, 1.0}, {}, {}, false};
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 2.0;
  c.master_seed = 99;
  const JumpLaw law = symmetric_two_point(0.2, 1.0);
  const Trajectory a = simulate(p, c, {0.0, 0.0, 0.0}, law);
  const Trajectory b = simulate(p, c, {0.0, 0.0, 0.0}, law);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k)
    for (int i = 0; i < 3; ++i)
      CHECK(a.records[k].positions[i] == b.records[k].positions[i]);
}

TEST_CASE("ordered positions and regulation invariants hold on noisy paths") {
  SystemParams p{3, {-0.5, -1.0, -1.5}, {1.0, 1.0, 1.0}, 0.0, {}, false};
  SimConfig c;
  c.dt = 1e-2;
  c.horizon = 3.0;
  c.master_seed = 7;
  c.mode = Mode::regulated;
  const JumpLaw law = symmetric_two_point(0.3, 1.0);
  const Trajectory traj = simulate(p, c, {0.0, 1.0, 2.0}, law);
  std::vector<double> prev_reg(3, 0.0);
  for (const StateRecord& rec : traj.records) {
    for (int i = 0; i < 3; ++i) {
      CHECK(rec.positions[i] >= 0.0);
      CHECK(rec.regulation[i] >= prev_reg[i]);
      prev_reg[i] = rec.regulation[i];
      if (i) CHECK(rec.ordered[i] >= rec.ordered[i - 1]);
    }
  }
}

TEST_CASE("post-jump gaps equal the closed-form jump map") {
  auto run = [](Mode mode) {
    SystemParams p{3,
                   {0.2, 0.0, -0.2},
                   {1.0, 1.0, 1.0},
                   mode == Mode::regulated ? std::optional<double>(0.0)
                                           : std::nullopt,
                   {},
                   false};
    SimConfig c;
    c.dt = 1e-2;
    c.horizon = 4.0;
    c.master_seed = 17;
    c.mode = mode;
    const JumpLaw law = symmetric_two_point(0.5, 2.0);
    const Trajectory traj =
        simulate(p, c, mode == Mode::regulated
                           ? std::vector<double>{0.0, 0.5, 1.0}
                           : std::vector<double>{0.0, 0.5, 1.0},
                 law);
    REQUIRE(!traj.jumps.empty());
    for (const JumpRecord& j : traj.jumps) {
      std::vector<double> eta(3, 0.0);
      eta[j.pre_rank] = j.size;
      if (mode == Mode::unregulated) {
        const GapVector before = gaps_unregulated(j.ordered_before);
        const GapVector after = gaps_unregulated(j.ordered_after);
        const GapVector mapped = jump_map_F(before, eta);
        for (int i = 0; i < 2; ++i)
          CHECK(std::abs(after.values[i] - mapped.values[i]) <= 1e-12);
      } else {
        const GapVector before = gaps_regulated(j.ordered_before, 0.0);
        const GapVector after = gaps_regulated(j.ordered_after, 0.0);
        const GapVector mapped = jump_map_F_regulated(before, eta);
        for (int i = 0; i < 3; ++i)
          CHECK(std::abs(after.values[i] - mapped.values[i]) <= 1e-12);
      }
    }
  };
  run(Mode::unregulated);
  run(Mode::regulated);
}

TEST_CASE("pathwise error halves like sqrt(dt) under shared driving noise") {
  // Reference integrator over a fixed fine Brownian path, aggregated
  // consistently across step sizes; the scheme's strong error should drop
  // by >= 1.5 on average when dt shrinks by 4.
  const int n = 2;
  const std::vector<double> deltas = {0.5, -0.5};
  const double sigma = 1.0;
  const double horizon = 1.0;
  const double fine_dt = 1.0 / 512.0;
  const int fine_steps = 512;

  auto integrate = [&](const std::vector<std::vector<double>>& db, int stride) {
    std::vector<double> y = {0.0, 0.1};  // ordered vector
    for (int k = 0; k < fine_steps; k += stride) {
      const double h = fine_dt * stride;
      std::vector<double> inc(n, 0.0);
      for (int s = 0; s < stride; ++s)
        for (int i = 0; i < n; ++i) inc[i] += db[k + s][i];
      for (int i = 0; i < n; ++i) y[i] += deltas[i] * h + sigma * inc[i];
      isotonic_project(y);
    }
    return y;
  };

  double ratio_sum = 0.0;
  const int paths = 100;
  for (int p = 0; p < paths; ++p) {
    Rng rng(derive_seed(41, "convergence", p));
    std::vector<std::vector<double>> db(fine_steps, std::vector<double>(n));
    for (auto& row : db)
      for (double& v : row) v = std::sqrt(fine_dt) * rng.normal();
    const std::vector<double> ref = integrate(db, 1);
    const std::vector<double> coarse = integrate(db, 64);
    const std::vector<double> mid = integrate(db, 16);
    double e_coarse = 0.0, e_mid = 0.0;
    for (int i = 0; i < n; ++i) {
      e_coarse += std::abs(coarse[i] - ref[i]);
      e_mid += std::abs(mid[i] - ref[i]);
    }
    ratio_sum += e_coarse / std::max(e_mid, 1e-300);
  }
  CHECK(ratio_sum / paths >= 1.5);
}
