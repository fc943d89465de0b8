#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cps/system.hpp"

namespace cps {

/// One rank-indexed jump extracted from a trajectory: the size carried by
/// the rank the jumping particle occupied immediately before the jump.
struct RankedJump {
  std::size_t event_index;  // position in the event log
  int rank;
  double size;
};

/// Per-rank driving noise recovered from a recorded path: at each step the
/// rank-i Brownian increment is the raw increment of the particle occupying
/// rank i at the step start.
struct RankedNoise {
  int n = 0;
  std::vector<double> step_h;                   // one entry per continuous step
  std::vector<std::vector<double>> beta;        // beta[k][r], N(0, h_k) increments
  std::vector<RankedJump> jumps;                // in event order
  std::vector<std::vector<double>> ordered;     // ordered positions after each event
  std::vector<bool> event_is_jump;              // event log shape
  std::vector<std::size_t> step_of_event;       // index into step_h for step events
};

inline RankedNoise extract_ranked_noise(const Trajectory& traj) {
  if (traj.events.empty() && !traj.records.empty() && traj.records.size() > 1)
    throw std::invalid_argument(
        "trajectory lacks per-step records; simulate with record_steps");
  RankedNoise rn;
  rn.n = traj.params.n;
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const PathEvent& ev = traj.events[k];
    rn.event_is_jump.push_back(ev.is_jump);
    rn.ordered.push_back(ev.ordered_after);
    if (ev.is_jump) {
      rn.jumps.push_back({k, ev.jump_rank, ev.jump_size});
      rn.step_of_event.push_back(static_cast<std::size_t>(-1));
    } else {
      rn.step_of_event.push_back(rn.step_h.size());
      rn.step_h.push_back(ev.h);
      rn.beta.push_back(ev.ranked_db);
    }
  }
  return rn;
}

/// A one-dimensional path reflected at a level, with its cumulative
/// reflection correction.
struct DominatorPath {
  std::vector<double> values;      // one entry per event, after the event
  std::vector<double> correction;  // cumulative clamp corrections
  double start = 0.0;
  double level = 0.0;
};

/// Dominating process for the i-th adjacent gap (1 <= i <= N-1, 1-based):
/// drift delta_{i+1} - delta_i, diffusion sigma_{i+1} dbeta_{i+1} -
/// sigma_i dbeta_i, plus the absolute value of every jump of every rank,
/// reflected at 0 by clamping.
inline DominatorPath simulate_dominator_gap(int i, double y,
                                            const SystemParams& params,
                                            const RankedNoise& noise) {
  if (i < 1 || i > params.n - 1)
    throw std::invalid_argument("dominator rank index must lie in 1..N-1");
  if (y < 0.0) throw std::invalid_argument("dominator start must be nonnegative");
  DominatorPath path;
  path.start = y;
  path.level = 0.0;
  path.values.reserve(noise.event_is_jump.size());
  path.correction.reserve(noise.event_is_jump.size());
  double d = y, corr = 0.0;
  const double drift = params.deltas[i] - params.deltas[i - 1];
  std::size_t jump_idx = 0;
  for (std::size_t k = 0; k < noise.event_is_jump.size(); ++k) {
    if (noise.event_is_jump[k]) {
      // every jump contributes its magnitude
      while (jump_idx < noise.jumps.size() &&
             noise.jumps[jump_idx].event_index <= k) {
        if (noise.jumps[jump_idx].event_index == k)
          d += std::abs(noise.jumps[jump_idx].size);
        ++jump_idx;
      }
    } else {
      const std::size_t s = noise.step_of_event[k];
      d += drift * noise.step_h[s] + params.sigmas[i] * noise.beta[s][i] -
           params.sigmas[i - 1] * noise.beta[s][i - 1];
      if (d < 0.0) {
        corr += -d;
        d = 0.0;
      }
    }
    path.values.push_back(d);
    path.correction.push_back(corr);
  }
  return path;
}

/// Max over events and ranks of (adjacent gap - dominator). The dominator
/// family is built from the trajectory's own ranked noise, started at the
/// initial adjacent gaps. Nonpositive (up to float slack) when the
/// domination construction holds.
inline double verify_gap_domination(const Trajectory& traj) {
  const RankedNoise noise = extract_ranked_noise(traj);
  const SystemParams& params = traj.params;
  const std::vector<double>& y0 = traj.records.front().ordered;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= params.n - 1; ++i) {
    const double start = y0[i] - y0[i - 1];
    const DominatorPath dom = simulate_dominator_gap(i, start, params, noise);
    for (std::size_t k = 0; k < noise.ordered.size(); ++k) {
      const double gap = noise.ordered[k][i] - noise.ordered[k][i - 1];
      worst = std::max(worst, gap - dom.values[k]);
    }
  }
  return worst;
}

/// Noise of a single particle, as consumed by the constant-coefficient
/// regulated step: Brownian increments, bridge uniforms and the jump
/// schedule. Sharing it between a particle and its dominator makes the
/// pathwise domination exact.
struct ParticleNoise {
  std::vector<double> step_h;
  std::vector<double> db;        // N(0, h) increments
  std::vector<double> bridge_u;  // uniforms for the bridge-minimum reflection
  std::vector<JumpEvent> jumps;
};

/// Draws particle noise on a uniform step grid over [0, horizon].
inline ParticleNoise make_particle_noise(std::uint64_t master_seed,
                                         std::uint64_t stream_id,
                                         const JumpLaw& law, double horizon,
                                         double dt) {
  ParticleNoise pn;
  pn.jumps = sample_jump_schedule(master_seed, stream_id, law, horizon);
  Rng rng(derive_seed(master_seed, "brownian", stream_id));
  const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-12));
  pn.step_h.reserve(steps);
  pn.db.reserve(steps);
  pn.bridge_u.reserve(steps);
  double t = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double h = std::min(dt, horizon - t);
    pn.step_h.push_back(h);
    pn.db.push_back(std::sqrt(h) * rng.normal());
    pn.bridge_u.push_back(std::max(rng.uniform01(), 1e-300));
    t += h;
  }
  return pn;
}

namespace detail {

// One constant-coefficient regulated particle over shared noise. When
// add_abs_jumps is set this is the dominator: jumps contribute |size|.
inline std::vector<double> reflected_particle_path(
    double x0, double delta, double sigma, double b, const ParticleNoise& noise,
    bool add_abs_jumps, std::vector<double>* times = nullptr) {
  std::vector<double> values;
  values.reserve(noise.step_h.size());
  double x = x0, t = 0.0;
  std::size_t jump_idx = 0;
  auto consume_jumps = [&](double until) {
    while (jump_idx < noise.jumps.size() &&
           noise.jumps[jump_idx].time <= until + 1e-12) {
      const double s = noise.jumps[jump_idx].size;
      x = add_abs_jumps ? x + std::abs(s) : std::max(x + s, b);
      ++jump_idx;
    }
  };
  for (std::size_t k = 0; k < noise.step_h.size(); ++k) {
    const double h = noise.step_h[k];
    const double end = x + delta * h + sigma * noise.db[k];
    double value = end;
    if (sigma > 0.0) {
      const double m = bridge_minimum(x, end, sigma, h, noise.bridge_u[k]);
      value = end + std::max(0.0, b - m);
    } else {
      value = std::max(end, b);
    }
    x = value;
    t += h;
    consume_jumps(t);
    values.push_back(x);
    if (times) times->push_back(t);
  }
  return values;
}

}  // namespace detail

/// H-dominator of one constant-coefficient regulated particle: same start,
/// drift, Brownian path and bridge uniforms, jumps entering as |size|,
/// reflected at b.
inline DominatorPath simulate_H(double x0, double delta, double sigma, double b,
                                const ParticleNoise& noise) {
  DominatorPath path;
  path.start = x0;
  path.level = b;
  path.values = detail::reflected_particle_path(x0, delta, sigma, b, noise, true);
  return path;
}

/// The particle itself under the same noise (regulated dynamics).
inline DominatorPath simulate_reflected_particle(double x0, double delta,
                                                 double sigma, double b,
                                                 const ParticleNoise& noise) {
  DominatorPath path;
  path.start = x0;
  path.level = b;
  path.values = detail::reflected_particle_path(x0, delta, sigma, b, noise, false);
  return path;
}

/// Two regulated systems driven by identical rank-attached Brownian and
/// jump streams, started from componentwise-ordered initial ordered vectors.
struct CoupledPair {
  std::vector<double> times;
  std::vector<std::vector<double>> low;   // ordered vectors per grid time
  std::vector<std::vector<double>> high;
  double max_order_violation = 0.0;       // max over times/ranks of low - high
};

/// Rank-coupled monotone pair: each step both systems consume the same
/// rank-indexed Brownian increments and the same rank-indexed jumps, applied
/// before relabeling; the componentwise order of the ordered vectors is
/// preserved by the shared drift/project/clamp/jump maps.
inline CoupledPair simulate_rank_coupled_pair(const SystemParams& params,
                                              const SimConfig& config,
                                              const JumpLaw& law,
                                              std::vector<double> init_low,
                                              std::vector<double> init_high) {
  params.validate(Mode::regulated);
  if (!params.barrier) throw std::invalid_argument("coupled pair needs a barrier");
  const double b = *params.barrier;
  const int n = params.n;
  auto check_init = [&](const std::vector<double>& v, const char* what) {
    if (static_cast<int>(v.size()) != n)
      throw std::invalid_argument(std::string(what) + " must have length n");
    for (int i = 1; i < n; ++i)
      if (v[i] < v[i - 1])
        throw std::invalid_argument(std::string(what) + " must be nondecreasing");
    if (v[0] < b)
      throw std::invalid_argument(std::string(what) + " must lie above the barrier");
  };
  check_init(init_low, "init_low");
  check_init(init_high, "init_high");
  for (int i = 0; i < n; ++i)
    if (init_low[i] > init_high[i])
      throw std::invalid_argument("init_low must be componentwise below init_high");

  // rank-attached streams
  std::vector<Rng> rank_rng;
  std::vector<std::vector<JumpEvent>> rank_jumps(n);
  struct QueuedJump {
    double t;
    int rank;
    double size;
  };
  std::vector<QueuedJump> queue;
  for (int r = 0; r < n; ++r) {
    rank_rng.emplace_back(derive_seed(config.master_seed, "rank-brownian", r));
    rank_jumps[r] =
        sample_jump_schedule(config.master_seed, static_cast<std::uint64_t>(r),
                             law, config.horizon);
    for (const JumpEvent& e : rank_jumps[r]) queue.push_back({e.time, r, e.size});
  }
  std::sort(queue.begin(), queue.end(),
            [](const QueuedJump& a, const QueuedJump& c) { return a.t < c.t; });

  std::vector<double> lo = std::move(init_low), hi = std::move(init_high);
  auto cont_step = [&](std::vector<double>& y, const std::vector<double>& db,
                       double h) {
    for (int r = 0; r < n; ++r)
      y[r] += params.deltas[r] * h + params.sigmas[r] * db[r];
    isotonic_project(y);
    for (int r = 0; r < n && y[r] < b; ++r) y[r] = b;
  };
  auto jump_step = [&](std::vector<double>& y, int rank, double size) {
    y[rank] = std::max(y[rank] + size, b);
    std::sort(y.begin(), y.end());
  };

  CoupledPair out;
  const std::vector<double> grid = config.grid();
  std::size_t next_grid = 0, next_jump = 0;
  while (next_grid < grid.size() && grid[next_grid] <= 0.0) ++next_grid;
  double t = 0.0;
  const double time_eps = 1e-12;
  std::vector<double> db(n);
  auto record = [&](double at) {
    out.times.push_back(at);
    out.low.push_back(lo);
    out.high.push_back(hi);
    for (int r = 0; r < n; ++r)
      out.max_order_violation = std::max(out.max_order_violation, lo[r] - hi[r]);
  };
  record(0.0);
  while (next_grid < grid.size() || next_jump < queue.size()) {
    const double inf = std::numeric_limits<double>::infinity();
    const double t_grid = next_grid < grid.size() ? grid[next_grid] : inf;
    const double t_jump = next_jump < queue.size() ? queue[next_jump].t : inf;
    const double target = std::min({t_grid, t_jump, config.horizon});
    while (target - t > time_eps) {
      const double h = std::min(config.dt, target - t);
      const double sqrt_h = std::sqrt(h);
      for (int r = 0; r < n; ++r) db[r] = sqrt_h * rank_rng[r].normal();
      cont_step(lo, db, h);
      cont_step(hi, db, h);
      t += h;
    }
    t = target;
    if (t_jump <= target + time_eps) {
      jump_step(lo, queue[next_jump].rank, queue[next_jump].size);
      jump_step(hi, queue[next_jump].rank, queue[next_jump].size);
      ++next_jump;
    }
    if (t_grid <= target + time_eps) {
      record(t_grid);
      ++next_grid;
    }
  }
  return out;
}

}  // namespace cps
