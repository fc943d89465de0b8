#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cps/coupling.hpp"
#include "cps/system.hpp"

namespace cps {

/// Initial configuration of an infinite system: an explicit nondecreasing
/// prefix followed by the linear tail rule X_i(0) = max(prefix end,
/// gamma1 * i + gamma2), indices 1-based.
struct InfiniteInitial {
  std::vector<double> explicit_prefix;
  double gamma1 = 1.0;
  double gamma2 = 0.0;

  double position(std::size_t i) const {  // 1-based
    if (i == 0) throw std::invalid_argument("particle index is 1-based");
    if (i <= explicit_prefix.size()) return explicit_prefix[i - 1];
    const double tail = gamma1 * static_cast<double>(i) + gamma2;
    return explicit_prefix.empty() ? tail
                                   : std::max(explicit_prefix.back(), tail);
  }

  void validate() const {
    for (std::size_t i = 1; i < explicit_prefix.size(); ++i)
      if (explicit_prefix[i] < explicit_prefix[i - 1])
        throw std::invalid_argument("initial prefix must be nondecreasing");
  }
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

/// Smallest K such that the Monte Carlo union bound on the probability that
/// any particle beyond K ever reaches level y within the horizon is at most
/// epsilon. The per-particle tail probability is estimated from replicas of
/// sup_s (-sigma1 B - L)(s) against the threshold X_i(0) - y -
/// max_drift_abs * horizon, with a geometric extrapolation beyond the last
/// index whose estimate is positive.
inline int choose_truncation(const InfiniteInitial& initial, const JumpLaw& law,
                             double sigma1, double max_drift_abs, double horizon,
                             double y, double epsilon,
                             std::uint64_t master_seed = 1,
                             int replicas = 10000, double dt = 1e-2) {
  initial.validate();
  if (!(initial.gamma1 > 0.0))
    throw std::invalid_argument("gamma1 must be positive: the union bound may diverge");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  // replicas of the running supremum of the downward driving noise
  std::vector<double> sups;
  sups.reserve(replicas);
  for (int r = 0; r < replicas; ++r) {
    const std::uint64_t seed = derive_seed(master_seed, "replica", r);
    const std::vector<JumpEvent> jumps =
        sample_jump_schedule(seed, 0, law, horizon);
    Rng rng(derive_seed(seed, "brownian", 0));
    double x = 0.0, sup = 0.0, t = 0.0;
    std::size_t j = 0;
    while (t < horizon - 1e-12) {
      const double h = std::min(dt, horizon - t);
      x += -sigma1 * std::sqrt(h) * rng.normal();
      t += h;
      while (j < jumps.size() && jumps[j].time <= t + 1e-12) {
        x -= jumps[j].size;
        ++j;
      }
      sup = std::max(sup, x);
    }
    sups.push_back(sup);
  }
  std::sort(sups.begin(), sups.end());
  const double n = static_cast<double>(sups.size());
  auto tail_prob = [&](double threshold) {
    return (sups.end() -
            std::lower_bound(sups.begin(), sups.end(), threshold)) / n;
  };

  const double allowance = y + max_drift_abs * horizon;
  std::vector<double> p;  // p[i-1] = estimated tail prob of particle i
  std::size_t i = 1;
  for (;; ++i) {
    const double pi = tail_prob(initial.position(i) - allowance);
    p.push_back(pi);
    if (pi == 0.0 && i > initial.explicit_prefix.size()) break;
    if (i > 100000) break;  // cap; the tail is extrapolated below
  }
  // The thresholds are nondecreasing in i and every estimate comes from the
  // same sorted sample, so p is exactly nonincreasing and a zero estimate
  // stays zero for all later particles: the tail beyond the largest
  // simulated index is numerically zero when the scan ended at p == 0. If
  // the scan hit its cap while still positive, extrapolate geometrically
  // from the decay of the fractional estimates.
  double extrapolated = 0.0;
  if (p.back() > 0.0) {
    double ratio = 0.5;
    std::size_t lo = p.size(), hi = 0;
    for (std::size_t j = 0; j < p.size(); ++j)
      if (p[j] > 0.0 && p[j] < 1.0) {
        if (lo == p.size()) lo = j;
        hi = j;
      }
    if (hi > lo && p[hi] < p[lo])
      ratio = std::clamp(std::pow(p[hi] / p[lo],
                                  1.0 / static_cast<double>(hi - lo)),
                         0.05, 0.95);
    extrapolated = p.back() * ratio / (1.0 - ratio);
  }

  // suffix[k] = sum_{i > k} p_i (particles are 1-based); smallest K >= 1
  // with suffix[K] <= epsilon
  std::vector<double> suffix(p.size() + 1);
  suffix[p.size()] = extrapolated;
  for (std::size_t j = p.size(); j-- > 0;) suffix[j] = suffix[j + 1] + p[j];
  for (std::size_t k = 1; k <= p.size(); ++k)
    if (suffix[k] <= epsilon) return static_cast<int>(k);
  throw std::runtime_error("union bound did not close; check the parameters");
}

/// K-particle truncation of the regulated infinite system with constant
/// coefficients: independent reflected paths over per-particle noise
/// streams, recorded at every step time.
struct RegulatedTruncation {
  std::vector<double> times;
  std::vector<std::vector<double>> particles;  // particles[i][k]
  std::vector<std::vector<double>> gaps;       // per time, sorted values - b
};

inline RegulatedTruncation simulate_infinite_regulated(
    const InfiniteInitial& initial, int K, const SystemParams& params,
    const SimConfig& config, const JumpLaw& law) {
  initial.validate();
  if (K < 1) throw std::invalid_argument("truncation size must be >= 1");
  if (!params.barrier)
    throw std::invalid_argument("regulated truncation needs a barrier");
  for (double d : params.deltas)
    if (d != params.deltas[0])
      throw std::invalid_argument("regulated truncation needs constant drifts");
  for (double s : params.sigmas)
    if (s != params.sigmas[0])
      throw std::invalid_argument("regulated truncation needs constant volatilities");
  const double delta = params.deltas[0];
  const double sigma = params.sigmas[0];
  const double b = *params.barrier;

  RegulatedTruncation out;
  out.particles.reserve(K);
  for (int i = 0; i < K; ++i) {
    const double x0 = initial.position(static_cast<std::size_t>(i) + 1);
    if (x0 < b)
      throw std::invalid_argument("initial positions must lie above the barrier");
    const ParticleNoise noise = make_particle_noise(
        config.master_seed, static_cast<std::uint64_t>(i), law, config.horizon,
        config.dt);
    std::vector<double>* times = (i == 0) ? &out.times : nullptr;
    out.particles.push_back(
        detail::reflected_particle_path(x0, delta, sigma, b, noise, false, times));
  }
  out.gaps.resize(out.times.size());
  std::vector<double> vals(K);
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    for (int i = 0; i < K; ++i) vals[i] = out.particles[i][k];
    std::sort(vals.begin(), vals.end());
    out.gaps[k].resize(K);
    for (int i = 0; i < K; ++i) out.gaps[k][i] = vals[i] - b;
  }
  return out;
}

/// Activation history of the unregulated truncation: the initial active set
/// and, per later activation, the time, the particle and the levels involved
/// (for checking the grid-resolution tolerance of the detection).
struct ActivationSchedule {
  std::vector<int> initial_active;
  struct Event {
    double time;
    int particle;
    double position;  // activated particle's position at detection
    double level;     // M-th ranked active position at detection
  };
  std::vector<Event> events;
};

struct UnregulatedTruncation {
  std::vector<double> times;                     // output grid (with t = 0)
  std::vector<std::vector<double>> positions;    // per grid time, by particle
  ActivationSchedule schedule;
};

/// Truncated unregulated infinite system via the activation construction:
/// the active particles evolve as a rank-based finite system (drifts frozen
/// at their current active ranks, constant beyond rank M), inactive
/// particles advance as free paths with the tail drift; any inactive
/// particle found at or below the M-th ranked active position is activated.
inline UnregulatedTruncation simulate_infinite_unregulated(
    const InfiniteInitial& initial, int K, const SystemParams& params,
    int tail_index_m, const SimConfig& config, const JumpLaw& law) {
  initial.validate();
  if (tail_index_m < 1) throw std::invalid_argument("M must be >= 1");
  if (K < tail_index_m)
    throw std::invalid_argument("truncation size must be at least M");
  if (static_cast<int>(params.deltas.size()) < tail_index_m)
    throw std::invalid_argument("need drifts up to rank M");
  for (std::size_t r = tail_index_m; r < params.deltas.size(); ++r)
    if (params.deltas[r] != params.deltas[tail_index_m - 1])
      throw std::invalid_argument("drifts must be constant beyond rank M");
  for (double s : params.sigmas)
    if (s != params.sigmas[0])
      throw std::invalid_argument("volatilities must be constant");
  const double sigma = params.sigmas[0];
  const double tail_drift = params.deltas[tail_index_m - 1];
  auto drift_of_rank = [&](int r) {  // 0-based rank among active particles
    return r < static_cast<int>(params.deltas.size()) ? params.deltas[r]
                                                      : tail_drift;
  };

  std::vector<double> x(K);
  for (int i = 0; i < K; ++i) x[i] = initial.position(static_cast<std::size_t>(i) + 1);

  std::vector<bool> active(K, false);
  UnregulatedTruncation out;
  {
    // initially active: the M lowest starts (initial sequence nondecreasing)
    std::vector<int> idx(K);
    for (int i = 0; i < K; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int c) { return x[a] < x[c]; });
    for (int r = 0; r < tail_index_m; ++r) active[idx[r]] = true;
    for (int i = 0; i < K; ++i)
      if (active[i]) out.schedule.initial_active.push_back(i);
  }

  // The active subsystem runs through the same stepper as the finite system
  // (same per-particle noise streams, same jump timing), so the all-active
  // truncation reproduces finite simulation bit-exactly. Streams move from
  // the pool into the active subsystem on activation.
  std::vector<NoiseStream> pool;
  pool.reserve(K);
  for (int i = 0; i < K; ++i)
    pool.emplace_back(config.master_seed, static_cast<std::uint64_t>(i), law,
                      config.horizon);

  struct QueuedJump {
    double t;
    int particle;
    double size;
  };
  std::vector<QueuedJump> queue;
  for (int i = 0; i < K; ++i)
    for (const JumpEvent& e : pool[i].jumps()) queue.push_back({e.time, i, e.size});
  std::sort(queue.begin(), queue.end(),
            [](const QueuedJump& a, const QueuedJump& b) { return a.t < b.t; });

  SystemState active_state;
  std::vector<NoiseStream> active_noise;
  std::vector<int> slot_particle;  // active slot -> original particle id
  std::vector<int> slot_of(K, -1);
  SystemParams active_params = params;
  auto rebuild_active_params = [&]() {
    const int a = static_cast<int>(slot_particle.size());
    active_params.n = a;
    active_params.deltas.resize(a);
    for (int r = 0; r < a; ++r) active_params.deltas[r] = drift_of_rank(r);
    active_params.sigmas.assign(a, sigma);
    active_params.barrier.reset();
    active_params.tie_order.clear();
  };
  auto add_active = [&](int particle) {
    slot_of[particle] = static_cast<int>(slot_particle.size());
    slot_particle.push_back(particle);
    active_state.positions.push_back(x[particle]);
    active_state.regulation.push_back(0.0);
    active_state.barrier_reflection.push_back(0.0);
    active_state.pair_reflection.assign(slot_particle.size() - 1, 0.0);
    active_noise.push_back(std::move(pool[particle]));
    rebuild_active_params();
  };
  for (int i = 0; i < K; ++i)
    if (active[i]) add_active(i);

  auto sync_positions = [&]() {
    for (std::size_t s = 0; s < slot_particle.size(); ++s)
      x[slot_particle[s]] = active_state.positions[s];
  };

  auto mth_active_level = [&]() {
    std::vector<double> vals = active_state.positions;
    std::nth_element(vals.begin(), vals.begin() + (tail_index_m - 1), vals.end());
    return vals[tail_index_m - 1];
  };
  auto activation_sweep = [&](double now) {
    for (;;) {
      const double level = mth_active_level();
      int newly = -1;
      for (int i = 0; i < K; ++i)
        if (!active[i] && x[i] <= level) {
          newly = i;
          break;
        }
      if (newly < 0) break;
      active[newly] = true;
      out.schedule.events.push_back({now, newly, x[newly], level});
      add_active(newly);
    }
  };

  const std::vector<double> grid = config.grid();
  std::size_t next_grid = 0;
  auto record = [&](double t) {
    sync_positions();
    out.times.push_back(t);
    out.positions.push_back(x);
  };
  record(0.0);
  while (next_grid < grid.size() && grid[next_grid] <= 0.0) ++next_grid;

  std::size_t next_jump = 0;
  double t = 0.0;
  const double time_eps = 1e-12;
  const double inf = std::numeric_limits<double>::infinity();
  while (next_grid < grid.size() || next_jump < queue.size() ||
         t < config.horizon - time_eps) {
    const double t_grid = next_grid < grid.size() ? grid[next_grid] : inf;
    const double t_jump = next_jump < queue.size() ? queue[next_jump].t : inf;
    const double target = std::min({t_grid, t_jump, config.horizon});
    if (!std::isfinite(target) || target > config.horizon + time_eps) break;

    while (target - t > time_eps) {
      const double h = std::min(config.dt, target - t);
      const double sqrt_h = std::sqrt(h);
      step_continuous(active_state, active_params, active_noise, h,
                      Mode::unregulated);
      sync_positions();
      for (int i = 0; i < K; ++i)
        if (!active[i])
          x[i] += tail_drift * h + sigma * sqrt_h * pool[i].normal();
      t += h;
      activation_sweep(t);
    }
    t = target;
    active_state.t = t;

    if (t_jump <= target + time_eps) {
      const QueuedJump& j = queue[next_jump];
      if (active[j.particle]) {
        apply_jump(active_state, slot_of[j.particle], j.size, active_params,
                   Mode::unregulated);
        sync_positions();
      } else {
        x[j.particle] += j.size;
      }
      activation_sweep(t);
      ++next_jump;
    }
    if (t_grid <= target + time_eps) {
      record(t_grid);
      ++next_grid;
    }
    if (t >= config.horizon - time_eps && next_grid >= grid.size() &&
        next_jump >= queue.size())
      break;
  }
  return out;
}

/// Per-coordinate 95% quantile trajectories of the regulated truncation's
/// gap process across independent replicas, with a per-coordinate growth
/// ratio (window max over the value at the first grid time) as a
/// uniform-boundedness diagnostic.
struct TightnessReport {
  std::vector<int> coordinates;  // 1-based gap indices
  std::vector<double> times;
  std::vector<std::vector<double>> q95;  // q95[j][t]
  std::vector<double> ratio;             // max_t q / q at the first time
};

inline TightnessReport tightness_diagnostic(
    const InfiniteInitial& initial, int K, const SystemParams& params,
    const SimConfig& base, const JumpLaw& law,
    const std::vector<int>& coordinates, const std::vector<double>& time_grid,
    int replicas) {
  if (replicas < 2) throw std::invalid_argument("replicas must be >= 2");
  for (int j : coordinates)
    if (j < 1 || j > K)
      throw std::invalid_argument("gap coordinates must lie in 1..K");
  std::vector<double> times = time_grid;
  std::sort(times.begin(), times.end());

  // samples[j][t][r]
  std::vector<std::vector<std::vector<double>>> samples(
      coordinates.size(),
      std::vector<std::vector<double>>(times.size()));
  SimConfig config = base;
  config.horizon = times.back();
  for (int r = 0; r < replicas; ++r) {
    config.master_seed = derive_seed(base.master_seed, "replica", r);
    const RegulatedTruncation run =
        simulate_infinite_regulated(initial, K, params, config, law);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const auto it = std::lower_bound(run.times.begin(), run.times.end(),
                                       times[ti] - config.dt / 2);
      if (it == run.times.end())
        throw std::logic_error("requested time beyond the simulated horizon");
      const std::size_t k = it - run.times.begin();
      for (std::size_t ji = 0; ji < coordinates.size(); ++ji)
        samples[ji][ti].push_back(run.gaps[k][coordinates[ji] - 1]);
    }
  }

  TightnessReport rep;
  rep.coordinates = coordinates;
  rep.times = times;
  for (std::size_t ji = 0; ji < coordinates.size(); ++ji) {
    std::vector<double> q(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      q[ti] = detail::quantile(samples[ji][ti], 0.95);
    // growth ratio relative to the window start: exactly 1 for a
    // nonincreasing quantile trajectory, large under systematic growth. A
    // median denominator would conflate growth with the benign 1/t decay of
    // low order statistics while particles keep accumulating at the barrier.
    const double mx = *std::max_element(q.begin(), q.end());
    const double first = q.front();
    rep.q95.push_back(std::move(q));
    rep.ratio.push_back(first > 0.0
                            ? mx / first
                            : (mx > 0.0
                                   ? std::numeric_limits<double>::infinity()
                                   : 1.0));
  }
  return rep;
}

}  // namespace cps
