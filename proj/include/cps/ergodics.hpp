#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cps/system.hpp"

namespace cps {

/// Sample-based representation of a gap-vector distribution.
struct EmpiricalMeasure {
  std::vector<std::vector<double>> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
};

/// Binning for TV estimation: either explicit edges per coordinate or
/// quantile-based edges computed from the pooled samples. With automatic
/// sizing the total cell count is kept near n/200 (capped at 20 bins per
/// coordinate) so the same-law noise floor of the plug-in estimator stays
/// well below the decision thresholds.
struct Binning {
  int bins_per_coord = 0;                  // 0 -> automatic
  std::vector<std::vector<double>> edges;  // optional explicit interior edges
};

struct TvEstimate {
  double tv = 0.0;
  double std_error = 0.0;
  // dimension > 3: max over coordinates of marginal binned TV, a lower bound
  bool marginal_lower_bound = false;
};

namespace detail {

inline int auto_bins(std::size_t n_min, std::size_t dim) {
  const double per = std::pow(std::max<double>(1.0, n_min / 200.0),
                              1.0 / static_cast<double>(dim));
  return std::clamp(static_cast<int>(per), 2, 20);
}

// interior quantile edges of the pooled coordinate samples
inline std::vector<double> quantile_edges(std::vector<double> pooled, int bins) {
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> edges;
  edges.reserve(bins - 1);
  const std::size_t n = pooled.size();
  for (int k = 1; k < bins; ++k) {
    const std::size_t idx =
        std::min(n - 1, static_cast<std::size_t>(n * static_cast<double>(k) / bins));
    edges.push_back(pooled[idx]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

inline std::size_t bin_index(double x, const std::vector<double>& edges) {
  return std::upper_bound(edges.begin(), edges.end(), x) - edges.begin();
}

// half L1 distance between two count vectors
inline double tv_from_counts(const std::vector<double>& p,
                             const std::vector<double>& q, double np, double nq) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] / np - q[k] / nq);
  return 0.5 * s;
}

struct CellAssignment {
  std::vector<std::size_t> cell_a, cell_b;
  std::size_t n_cells = 0;
};

inline CellAssignment assign_cells(const EmpiricalMeasure& a,
                                   const EmpiricalMeasure& b,
                                   const std::vector<std::vector<double>>& edges) {
  const std::size_t dim = edges.size();
  std::vector<std::size_t> radix(dim, 1);
  std::size_t n_cells = 1;
  for (std::size_t c = 0; c < dim; ++c) {
    radix[c] = n_cells;
    n_cells *= edges[c].size() + 1;
  }
  CellAssignment out;
  out.n_cells = n_cells;
  auto assign = [&](const EmpiricalMeasure& m, std::vector<std::size_t>& cells) {
    cells.reserve(m.size());
    for (const auto& s : m.samples) {
      std::size_t cell = 0;
      for (std::size_t c = 0; c < dim; ++c) cell += radix[c] * bin_index(s[c], edges[c]);
      cells.push_back(cell);
    }
  };
  assign(a, out.cell_a);
  assign(b, out.cell_b);
  return out;
}

inline double tv_of_cells(const CellAssignment& cells, std::size_t na,
                          std::size_t nb) {
  std::vector<double> pa(cells.n_cells, 0.0), pb(cells.n_cells, 0.0);
  for (std::size_t c : cells.cell_a) pa[c] += 1.0;
  for (std::size_t c : cells.cell_b) pb[c] += 1.0;
  return tv_from_counts(pa, pb, static_cast<double>(na), static_cast<double>(nb));
}

}  // namespace detail

/// Plug-in binned total variation estimate between two sample sets, with a
/// bootstrap standard error (200 resamples over a fixed binning). Product
/// binning up to dimension 3; above that the max over coordinate marginals
/// is reported and flagged as a lower bound.
inline TvEstimate binned_tv(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                            const Binning& binning = {},
                            std::uint64_t bootstrap_seed = 7,
                            int bootstrap_resamples = 200) {
  if (a.size() == 0 || b.size() == 0)
    throw std::invalid_argument("binned_tv needs nonempty measures");
  if (a.dim() != b.dim())
    throw std::invalid_argument("binned_tv needs measures of equal dimension");
  const std::size_t dim = a.dim();
  const std::size_t n_min = std::min(a.size(), b.size());

  TvEstimate est;
  std::vector<std::vector<double>> edges;
  std::size_t use_dims = dim;
  if (dim > 3 && binning.edges.empty()) {
    est.marginal_lower_bound = true;
  }

  auto edges_for = [&](std::size_t coord, int bins) {
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    for (const auto& s : a.samples) pooled.push_back(s[coord]);
    for (const auto& s : b.samples) pooled.push_back(s[coord]);
    return detail::quantile_edges(std::move(pooled), bins);
  };

  detail::CellAssignment cells;
  if (!binning.edges.empty()) {
    edges = binning.edges;
    cells = detail::assign_cells(a, b, edges);
    est.tv = detail::tv_of_cells(cells, a.size(), b.size());
  } else if (!est.marginal_lower_bound) {
    const int bins = binning.bins_per_coord > 0 ? binning.bins_per_coord
                                                : detail::auto_bins(n_min, dim);
    edges.resize(dim);
    for (std::size_t c = 0; c < dim; ++c) edges[c] = edges_for(c, bins);
    cells = detail::assign_cells(a, b, edges);
    est.tv = detail::tv_of_cells(cells, a.size(), b.size());
  } else {
    // marginal max; keep the argmax coordinate's cells for the bootstrap
    const int bins = binning.bins_per_coord > 0 ? binning.bins_per_coord
                                                : detail::auto_bins(n_min, 1);
    double best = -1.0;
    for (std::size_t c = 0; c < dim; ++c) {
      std::vector<std::vector<double>> e{edges_for(c, bins)};
      EmpiricalMeasure ma, mb;
      ma.samples.reserve(a.size());
      mb.samples.reserve(b.size());
      for (const auto& s : a.samples) ma.samples.push_back({s[c]});
      for (const auto& s : b.samples) mb.samples.push_back({s[c]});
      detail::CellAssignment cc = detail::assign_cells(ma, mb, e);
      const double tv = detail::tv_of_cells(cc, ma.size(), mb.size());
      if (tv > best) {
        best = tv;
        cells = std::move(cc);
      }
    }
    est.tv = best;
    use_dims = 1;
  }
  (void)use_dims;

  if (bootstrap_resamples > 0) {
    Rng rng(bootstrap_seed);
    std::vector<double> tvs;
    tvs.reserve(bootstrap_resamples);
    std::vector<double> pa(cells.n_cells), pb(cells.n_cells);
    for (int r = 0; r < bootstrap_resamples; ++r) {
      std::fill(pa.begin(), pa.end(), 0.0);
      std::fill(pb.begin(), pb.end(), 0.0);
      for (std::size_t k = 0; k < cells.cell_a.size(); ++k) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform01() *
                                                          cells.cell_a.size());
        pa[cells.cell_a[std::min(pick, cells.cell_a.size() - 1)]] += 1.0;
      }
      for (std::size_t k = 0; k < cells.cell_b.size(); ++k) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform01() *
                                                          cells.cell_b.size());
        pb[cells.cell_b[std::min(pick, cells.cell_b.size() - 1)]] += 1.0;
      }
      tvs.push_back(detail::tv_from_counts(pa, pb,
                                           static_cast<double>(cells.cell_a.size()),
                                           static_cast<double>(cells.cell_b.size())));
    }
    double mean = 0.0;
    for (double t : tvs) mean += t;
    mean /= tvs.size();
    double var = 0.0;
    for (double t : tvs) var += (t - mean) * (t - mean);
    est.std_error = std::sqrt(var / (tvs.size() - 1));
  }
  return est;
}

/// Two-sample Kolmogorov-Smirnov statistic on one coordinate.
inline double ks_marginal(const EmpiricalMeasure& a, std::size_t coordinate,
                          const EmpiricalMeasure& reference) {
  if (coordinate >= a.dim() || coordinate >= reference.dim())
    throw std::invalid_argument("ks_marginal: coordinate out of range");
  std::vector<double> xs, ys;
  xs.reserve(a.size());
  ys.reserve(reference.size());
  for (const auto& s : a.samples) xs.push_back(s[coordinate]);
  for (const auto& s : reference.samples) ys.push_back(s[coordinate]);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    const double x = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= x) ++i;
    while (j < ys.size() && ys[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / xs.size() -
                             static_cast<double>(j) / ys.size()));
  }
  return d;
}

/// One-sample Kolmogorov-Smirnov statistic against a reference cdf.
inline double ks_marginal(const EmpiricalMeasure& a, std::size_t coordinate,
                          const std::function<double(double)>& cdf) {
  if (coordinate >= a.dim())
    throw std::invalid_argument("ks_marginal: coordinate out of range");
  std::vector<double> xs;
  xs.reserve(a.size());
  for (const auto& s : a.samples) xs.push_back(s[coordinate]);
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max(f - i / n, (i + 1) / n - f));
  }
  return d;
}

/// Turns an initial gap vector into an initial particle configuration.
inline std::vector<double> positions_from_gaps(const std::vector<double>& gaps,
                                               Mode mode, double barrier) {
  std::vector<double> pos;
  if (mode == Mode::unregulated) {
    pos.reserve(gaps.size() + 1);
    pos.push_back(0.0);
    for (double z : gaps) pos.push_back(z);
  } else {
    pos.reserve(gaps.size());
    for (double z : gaps) pos.push_back(barrier + z);
  }
  return pos;
}

/// Gap-vector samples at several times from independent replicas (disjoint
/// seed substreams per replica). Returns one measure per requested time.
inline std::vector<EmpiricalMeasure> sample_gaps_at_times(
    const SystemParams& params, const JumpLaw& law, const SimConfig& base,
    const std::vector<double>& initial_gaps, const std::vector<double>& times,
    int replicas) {
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  std::vector<double> grid = times;
  std::sort(grid.begin(), grid.end());
  SimConfig config = base;
  config.output_grid = grid;
  config.horizon = grid.back();
  config.record_steps = false;
  const std::vector<double> init =
      positions_from_gaps(initial_gaps, config.mode,
                          params.barrier.value_or(0.0));
  std::vector<EmpiricalMeasure> out(times.size());
  for (auto& m : out) m.samples.reserve(replicas);
  for (int r = 0; r < replicas; ++r) {
    config.master_seed = derive_seed(base.master_seed, "replica", r);
    const Trajectory traj = simulate(params, config, init, law);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const double t = times[ti];
      const auto it = std::find_if(traj.records.begin(), traj.records.end(),
                                   [&](const StateRecord& rec) {
                                     return std::abs(rec.t - t) < 1e-9;
                                   });
      if (it == traj.records.end())
        throw std::logic_error("requested time missing from trajectory records");
      out[ti].samples.push_back(it->gaps);
    }
  }
  return out;
}

inline EmpiricalMeasure sample_gaps_at(const SystemParams& params,
                                       const JumpLaw& law, const SimConfig& base,
                                       const std::vector<double>& initial_gaps,
                                       double t, int replicas) {
  if (t <= 0.0) {
    EmpiricalMeasure m;
    m.samples.assign(replicas, initial_gaps);
    return m;
  }
  return sample_gaps_at_times(params, law, base, initial_gaps, {t}, replicas)[0];
}

/// Per-time convergence diagnostics.
struct ConvergenceReport {
  std::vector<double> times;
  std::vector<double> tv;
  std::vector<double> tv_std_error;
  std::vector<std::vector<double>> ks_marginals;  // per time, per coordinate
  int replicas = 0;
  bool marginal_lower_bound = false;
};

/// TV estimate per grid time between the laws started from two different
/// gap vectors (Monte Carlo realization of the merging of the two laws).
inline ConvergenceReport two_start_convergence(
    const SystemParams& params, const JumpLaw& law, const SimConfig& base,
    const std::vector<double>& init_a, const std::vector<double>& init_b,
    const std::vector<double>& times, int replicas) {
  SimConfig cfg_b = base;
  cfg_b.master_seed = derive_seed(base.master_seed, "second-start", 1);
  const auto ma = sample_gaps_at_times(params, law, base, init_a, times, replicas);
  const auto mb = sample_gaps_at_times(params, law, cfg_b, init_b, times, replicas);
  ConvergenceReport rep;
  rep.times = times;
  rep.replicas = replicas;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const TvEstimate est =
        binned_tv(ma[ti], mb[ti], {}, derive_seed(base.master_seed, "bootstrap", ti));
    rep.tv.push_back(est.tv);
    rep.tv_std_error.push_back(est.std_error);
    rep.marginal_lower_bound = est.marginal_lower_bound;
    std::vector<double> ks;
    for (std::size_t c = 0; c < ma[ti].dim(); ++c)
      ks.push_back(ks_marginal(ma[ti], c, mb[ti]));
    rep.ks_marginals.push_back(std::move(ks));
  }
  return rep;
}

/// Compares the law of the skeleton chain Z(n_lo * eps) against
/// Z(n_hi * eps); a small TV indicates near-stationarity of the chain.
inline ConvergenceReport skeleton_stationarity(const SystemParams& params,
                                               const JumpLaw& law,
                                               const SimConfig& base,
                                               const std::vector<double>& init_gaps,
                                               double epsilon, int n_lo, int n_hi,
                                               int replicas) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (n_lo > n_hi) std::swap(n_lo, n_hi);
  ConvergenceReport rep;
  rep.replicas = replicas;
  rep.times = {n_lo * epsilon, n_hi * epsilon};
  if (n_lo == n_hi) {
    rep.tv = {0.0};
    rep.tv_std_error = {0.0};
    return rep;
  }
  std::vector<double> times = rep.times;
  if (times.front() <= 0.0) times.front() = std::min(1e-9, times.back());
  auto measures = (rep.times.front() <= 0.0)
                      ? std::vector<EmpiricalMeasure>{}
                      : sample_gaps_at_times(params, law, base, init_gaps, times,
                                             replicas);
  EmpiricalMeasure lo, hi;
  if (rep.times.front() <= 0.0) {
    lo.samples.assign(replicas, init_gaps);
    hi = sample_gaps_at(params, law, base, init_gaps, rep.times.back(), replicas);
  } else {
    lo = std::move(measures[0]);
    hi = std::move(measures[1]);
  }
  const TvEstimate est =
      binned_tv(lo, hi, {}, derive_seed(base.master_seed, "bootstrap", 99));
  rep.tv = {est.tv};
  rep.tv_std_error = {est.std_error};
  rep.marginal_lower_bound = est.marginal_lower_bound;
  return rep;
}

/// Empirical measure of the gap vectors over the recorded times after
/// burn-in (Cesaro-average view of a single long trajectory).
inline EmpiricalMeasure time_average(const Trajectory& traj, double burn_in) {
  if (burn_in >= traj.config.horizon)
    throw std::invalid_argument("burn_in must be smaller than the horizon");
  EmpiricalMeasure m;
  for (const StateRecord& rec : traj.records)
    if (rec.t > burn_in) m.samples.push_back(rec.gaps);
  return m;
}

}  // namespace cps
