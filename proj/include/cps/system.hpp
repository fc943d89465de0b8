#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cps/gaps.hpp"
#include "cps/noise.hpp"

namespace cps {

enum class Mode { unregulated, regulated };

/// Rank-indexed coefficients of the finite system. tie_order is a
/// permutation of particle indices fixing tie-breaking (defaults to
/// ascending particle index).
struct SystemParams {
  int n = 0;
  std::vector<double> deltas;
  std::vector<double> sigmas;
  std::optional<double> barrier;
  std::vector<int> tie_order;
  // sigma = 0 violates the positivity assumption of the theory; permitted
  // only for deterministic golden tests behind this flag.
  bool allow_zero_sigma = false;

  void validate(Mode mode) const {
    if (n < 1) throw std::invalid_argument("particle count must be >= 1");
    if (static_cast<int>(deltas.size()) != n || static_cast<int>(sigmas.size()) != n)
      throw std::invalid_argument("deltas and sigmas must have length n");
    for (double s : sigmas) {
      if (s < 0.0) throw std::invalid_argument("sigmas must be nonnegative");
      if (s == 0.0 && !allow_zero_sigma)
        throw std::invalid_argument(
            "sigma = 0 requires allow_zero_sigma (deterministic test mode)");
    }
    if (mode == Mode::regulated && !barrier)
      throw std::invalid_argument("regulated mode requires a barrier");
    if (!tie_order.empty()) {
      if (static_cast<int>(tie_order.size()) != n)
        throw std::invalid_argument("tie_order must be a permutation of 0..n-1");
      std::vector<int> seen(n, 0);
      for (int p : tie_order) {
        if (p < 0 || p >= n || seen[p]++)
          throw std::invalid_argument("tie_order must be a permutation of 0..n-1");
      }
    }
  }
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  std::vector<double> output_grid;  // empty -> 100 evenly spaced times
  std::uint64_t master_seed = 0;
  Mode mode = Mode::unregulated;
  bool record_steps = false;

  std::vector<double> grid() const {
    if (!output_grid.empty()) return output_grid;
    std::vector<double> g(100);
    for (int k = 1; k <= 100; ++k) g[k - 1] = horizon * k / 100.0;
    return g;
  }
};

struct SystemState {
  double t = 0.0;
  std::vector<double> positions;           // by particle
  std::vector<double> regulation;          // cumulative R_i, by particle
  std::vector<double> pair_reflection;     // clamp proxy per adjacent rank pair
  std::vector<double> barrier_reflection;  // clamp proxy per rank at the barrier
};

/// Maps particle index -> rank (0-based). Ties resolved by tie_order; an
/// empty tie_order means ascending particle index.
inline std::vector<int> rank_assignment(const std::vector<double>& positions,
                                        const std::vector<int>& tie_order) {
  const int n = static_cast<int>(positions.size());
  std::vector<int> tie_pos(n);
  if (tie_order.empty()) {
    std::iota(tie_pos.begin(), tie_pos.end(), 0);
  } else {
    for (int r = 0; r < n; ++r) tie_pos[tie_order[r]] = r;
  }
  std::vector<int> by_rank(n);
  std::iota(by_rank.begin(), by_rank.end(), 0);
  std::sort(by_rank.begin(), by_rank.end(), [&](int a, int b) {
    if (positions[a] != positions[b]) return positions[a] < positions[b];
    return tie_pos[a] < tie_pos[b];
  });
  std::vector<int> rank_of(n);
  for (int r = 0; r < n; ++r) rank_of[by_rank[r]] = r;
  return rank_of;
}

/// Pool-adjacent-violators projection onto the ordered cone
/// {v_1 <= ... <= v_n}. This is the normal projection; it realizes the
/// reflection of the ordered vector at the faces of the cone within one step.
inline void isotonic_project(std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return;
  static thread_local std::vector<double> sum;
  static thread_local std::vector<std::size_t> len;
  sum.assign(n, 0.0);
  len.assign(n, 0);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum[m] = v[i];
    len[m] = 1;
    while (m > 0 && sum[m - 1] * static_cast<double>(len[m]) >
                        sum[m] * static_cast<double>(len[m - 1])) {
      sum[m - 1] += sum[m];
      len[m - 1] += len[m];
      --m;
    }
    ++m;
  }
  std::size_t pos = 0;
  for (std::size_t block = 0; block < m; ++block) {
    const double mean = sum[block] / static_cast<double>(len[block]);
    for (std::size_t k = 0; k < len[block]; ++k) v[pos++] = mean;
  }
}

/// One event in a recorded path: either a continuous step (with the raw
/// Brownian increments indexed by the rank occupied at the step start) or a
/// jump (with the jumper's pre-jump rank). Consumed by the coupling checks.
struct PathEvent {
  bool is_jump = false;
  double t = 0.0;  // step start time / jump time
  double h = 0.0;
  std::vector<double> ranked_db;      // Brownian increments ~ N(0, h), by rank
  std::vector<double> ordered_after;  // ordered positions after the event
  int jump_rank = -1;
  double jump_size = 0.0;
};

struct StateRecord {
  double t;
  std::vector<double> positions;
  std::vector<double> ordered;
  std::vector<double> gaps;        // Z (unregulated) or Z^R (regulated)
  std::vector<double> regulation;  // by particle (regulated mode)
};

struct JumpRecord {
  double t;
  int particle;
  int pre_rank;
  double size;
  std::vector<double> ordered_before;
  std::vector<double> ordered_after;
};

struct Trajectory {
  SystemParams params;
  SimConfig config;
  std::vector<StateRecord> records;
  std::vector<JumpRecord> jumps;
  std::vector<PathEvent> events;  // filled only when config.record_steps
};

namespace detail {

// Conditional minimum of a Brownian bridge from x0 to x1 over a step of
// length h with volatility sigma, sampled by inversion from u in (0,1).
inline double bridge_minimum(double x0, double x1, double sigma, double h,
                             double u) {
  const double d = x1 - x0;
  const double r = std::sqrt(d * d - 2.0 * sigma * sigma * h * std::log(u));
  return 0.5 * (x0 + x1 - r);
}

}  // namespace detail

/// Advances the system by a jump-free interval h. Coefficients are frozen at
/// the step-start ranks; the ordered vector is restored by isotonic
/// projection; regulated mode then reflects at the barrier. For a single
/// regulated particle the barrier reflection uses the exact bridge-minimum
/// correction, which makes the one-particle path exact in law at step times.
inline void step_continuous(SystemState& state, const SystemParams& params,
                            std::vector<NoiseStream>& noise, double h, Mode mode,
                            PathEvent* record = nullptr) {
  if (!(h > 0.0)) throw std::invalid_argument("step length must be positive");
  const int n = params.n;
  const std::vector<int> rank_of = rank_assignment(state.positions, params.tie_order);

  static thread_local std::vector<double> db, v, y0;
  db.assign(n, 0.0);
  v.assign(n, 0.0);
  y0.assign(n, 0.0);
  const double sqrt_h = std::sqrt(h);
  for (int p = 0; p < n; ++p) {
    const int r = rank_of[p];
    db[r] = sqrt_h * noise[p].normal();
    y0[r] = state.positions[p];
    v[r] = state.positions[p] + params.deltas[r] * h + params.sigmas[r] * db[r];
  }
  isotonic_project(v);
  for (int r = 0; r + 1 < n; ++r) {
    // amount by which the projection lifted this adjacent gap
    const double lift = (v[r + 1] - v[r]) - ((y0[r + 1] - y0[r]) +
                        (params.deltas[r + 1] - params.deltas[r]) * h +
                        params.sigmas[r + 1] * db[r + 1] - params.sigmas[r] * db[r]);
    if (lift > 0.0) state.pair_reflection[r] += lift;
  }

  static thread_local std::vector<double> bpush;
  bpush.assign(n, 0.0);
  if (mode == Mode::regulated) {
    const double b = *params.barrier;
    if (n == 1 && params.sigmas[0] > 0.0) {
      const double u = noise[0].uniform01();
      const double m = detail::bridge_minimum(y0[0], v[0], params.sigmas[0], h,
                                              std::max(u, 1e-300));
      const double c = std::max(0.0, b - m);
      if (c > 0.0) {
        v[0] += c;
        bpush[0] = c;
        state.barrier_reflection[0] += c;
      }
    } else {
      for (int r = 0; r < n; ++r) {
        const double c = b - v[r];
        if (c > 0.0) {
          v[r] = b;
          bpush[r] = c;
          state.barrier_reflection[r] += c;
        } else {
          break;  // v is ordered; higher ranks cannot be below b
        }
      }
    }
  }

  for (int p = 0; p < n; ++p) {
    const int r = rank_of[p];
    state.positions[p] = v[r];
    if (mode == Mode::regulated) state.regulation[p] += bpush[r];
  }
  state.t += h;

  if (record) {
    record->is_jump = false;
    record->t = state.t - h;
    record->h = h;
    record->ranked_db = db;
    record->ordered_after = v;
  }
}

/// Applies one jump of the given size to one particle, with regulation at
/// the barrier in regulated mode.
inline void apply_jump(SystemState& state, int particle, double size,
                       const SystemParams& params, Mode mode) {
  if (!std::isfinite(size)) throw std::invalid_argument("jump size must be finite");
  const double landed = state.positions[particle] + size;
  if (mode == Mode::regulated && landed < *params.barrier) {
    state.regulation[particle] += *params.barrier - landed;
    state.positions[particle] = *params.barrier;
  } else {
    state.positions[particle] = landed;
  }
}

/// Ordered view of the current positions.
inline std::vector<double> ordered_positions(const SystemState& state,
                                             const SystemParams& params) {
  const std::vector<int> rank_of = rank_assignment(state.positions, params.tie_order);
  std::vector<double> y(state.positions.size());
  for (std::size_t p = 0; p < state.positions.size(); ++p)
    y[rank_of[p]] = state.positions[p];
  return y;
}

/// Simulates the finite system: continuous rank-based steps between jump
/// times, exact jump application at jump times, records at the output grid.
inline Trajectory simulate(const SystemParams& params, const SimConfig& config,
                           const std::vector<double>& initial,
                           const JumpLaw& law) {
  params.validate(config.mode);
  if (static_cast<int>(initial.size()) != params.n)
    throw std::invalid_argument("initial configuration must have length n");
  for (int i = 1; i < params.n; ++i)
    if (initial[i] < initial[i - 1])
      throw std::invalid_argument("initial configuration must be nondecreasing");
  if (config.mode == Mode::regulated && initial.front() < *params.barrier)
    throw std::invalid_argument("initial configuration must lie above the barrier");
  if (!(config.dt > 0.0) || config.dt > config.horizon)
    throw std::invalid_argument("require 0 < dt <= horizon");
  for (double g : config.output_grid)
    if (g < 0.0 || g > config.horizon)
      throw std::invalid_argument("output grid times must lie in [0, horizon]");

  Trajectory traj;
  traj.params = params;
  traj.config = config;

  SystemState state;
  state.t = 0.0;
  state.positions = initial;
  state.regulation.assign(params.n, 0.0);
  state.pair_reflection.assign(std::max(params.n - 1, 0), 0.0);
  state.barrier_reflection.assign(params.n, 0.0);

  std::vector<NoiseStream> noise;
  noise.reserve(params.n);
  for (int i = 0; i < params.n; ++i)
    noise.emplace_back(config.master_seed, static_cast<std::uint64_t>(i), law,
                       config.horizon);

  // merged jump queue over all particles
  struct QueuedJump {
    double t;
    int particle;
    double size;
  };
  std::vector<QueuedJump> queue;
  for (int i = 0; i < params.n; ++i)
    for (const JumpEvent& e : noise[i].jumps()) queue.push_back({e.time, i, e.size});
  std::sort(queue.begin(), queue.end(),
            [](const QueuedJump& a, const QueuedJump& b) { return a.t < b.t; });

  const std::vector<double> grid = config.grid();

  auto record_state = [&](double t) {
    StateRecord rec;
    rec.t = t;
    rec.positions = state.positions;
    rec.ordered = ordered_positions(state, params);
    rec.gaps = (config.mode == Mode::unregulated)
                   ? gaps_unregulated(rec.ordered).values
                   : gaps_regulated(rec.ordered, *params.barrier).values;
    rec.regulation = state.regulation;
    traj.records.push_back(std::move(rec));
  };

  record_state(0.0);

  std::size_t next_jump = 0;
  std::size_t next_grid = 0;
  while (next_grid < grid.size() && grid[next_grid] <= 0.0) ++next_grid;

  const double time_eps = 1e-12;
  const double inf = std::numeric_limits<double>::infinity();
  while (next_grid < grid.size() || next_jump < queue.size() ||
         state.t < config.horizon - time_eps) {
    const double t_grid = next_grid < grid.size() ? grid[next_grid] : inf;
    const double t_jump = next_jump < queue.size() ? queue[next_jump].t : inf;
    double target = std::min({t_grid, t_jump, config.horizon});
    if (!std::isfinite(target) || target > config.horizon + time_eps) break;

    // advance continuously to the target in dt-sized pieces
    while (target - state.t > time_eps) {
      const double h = std::min(config.dt, target - state.t);
      PathEvent ev;
      step_continuous(state, params, noise, h, config.mode,
                      config.record_steps ? &ev : nullptr);
      if (config.record_steps) traj.events.push_back(std::move(ev));
    }
    state.t = target;

    if (t_jump <= target + time_eps) {
      const QueuedJump& j = queue[next_jump];
      JumpRecord jr;
      jr.t = j.t;
      jr.particle = j.particle;
      jr.size = j.size;
      jr.ordered_before = ordered_positions(state, params);
      jr.pre_rank = rank_assignment(state.positions, params.tie_order)[j.particle];
      apply_jump(state, j.particle, j.size, params, config.mode);
      jr.ordered_after = ordered_positions(state, params);
      if (config.record_steps) {
        PathEvent ev;
        ev.is_jump = true;
        ev.t = j.t;
        ev.jump_rank = jr.pre_rank;
        ev.jump_size = j.size;
        ev.ordered_after = jr.ordered_after;
        traj.events.push_back(std::move(ev));
      }
      traj.jumps.push_back(std::move(jr));
      ++next_jump;
    }
    // a jump landing exactly on a grid time is recorded post-jump
    if (t_grid <= target + time_eps) {
      record_state(t_grid);
      ++next_grid;
    }
    if (state.t >= config.horizon - time_eps && next_grid >= grid.size() &&
        next_jump >= queue.size())
      break;
  }
  return traj;
}

}  // namespace cps
