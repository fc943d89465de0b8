#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cps {

enum class GapSpace { w_n_minus_1, w_n };
enum class GapMode { unregulated, regulated };

/// Element of W^{N-1} (gaps to the lowest particle) or W^N (ordered
/// particles minus the barrier): nonnegative and nondecreasing.
struct GapVector {
  std::vector<double> values;
  GapSpace space = GapSpace::w_n_minus_1;
};

namespace detail {

inline void require_sorted(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) throw std::invalid_argument(std::string(what) + " must be nondecreasing");
}

}  // namespace detail

/// Z = (Y_2 - Y_1, ..., Y_N - Y_1).
inline GapVector gaps_unregulated(const std::vector<double>& ordered) {
  detail::require_sorted(ordered, "ordered positions");
  GapVector z{{}, GapSpace::w_n_minus_1};
  z.values.reserve(ordered.empty() ? 0 : ordered.size() - 1);
  for (std::size_t i = 1; i < ordered.size(); ++i)
    z.values.push_back(ordered[i] - ordered[0]);
  return z;
}

/// Z^R = (Y_1 - b, ..., Y_N - b).
inline GapVector gaps_regulated(const std::vector<double>& ordered, double b) {
  detail::require_sorted(ordered, "ordered positions");
  if (!ordered.empty() && ordered.front() < b)
    throw std::invalid_argument("ordered positions must lie above the barrier");
  GapVector z{{}, GapSpace::w_n};
  z.values.reserve(ordered.size());
  for (double y : ordered) z.values.push_back(y - b);
  return z;
}

/// Sort/clamp route for the post-jump gap vector. Unregulated: rebuild
/// positions (0, z_1, ..., z_{N-1}), add eta, sort, re-reference to the new
/// minimum. Regulated: clamp z_j + eta_j at 0 and sort. This is the semantic
/// ground truth the closed-form maps are tested against.
inline GapVector jump_map_oracle(const GapVector& z, const std::vector<double>& eta,
                                 GapMode mode) {
  const std::size_t n = eta.size();
  if (mode == GapMode::unregulated) {
    if (z.values.size() + 1 != n)
      throw std::invalid_argument("eta must have one more entry than z");
    std::vector<double> pos(n);
    pos[0] = eta[0];
    for (std::size_t j = 1; j < n; ++j) pos[j] = z.values[j - 1] + eta[j];
    std::sort(pos.begin(), pos.end());
    GapVector out{{}, GapSpace::w_n_minus_1};
    out.values.reserve(n - 1);
    for (std::size_t j = 1; j < n; ++j) out.values.push_back(pos[j] - pos[0]);
    return out;
  }
  if (z.values.size() != n)
    throw std::invalid_argument("eta must match the dimension of z");
  std::vector<double> vals(n);
  for (std::size_t j = 0; j < n; ++j) vals[j] = std::max(z.values[j] + eta[j], 0.0);
  std::sort(vals.begin(), vals.end());
  return GapVector{std::move(vals), GapSpace::w_n};
}

/// F_i(z, eta) = min over 1 <= j_1 < ... < j_{i+1} <= N of
/// max(z_{j_1 - 1} + eta_{j_1}, ...) - min_j (z_{j-1} + eta_j), z_0 = 0.
/// Literal subset enumeration; use the oracle route for large N.
inline GapVector jump_map_F(const GapVector& z, const std::vector<double>& eta) {
  const std::size_t n = eta.size();
  if (z.values.size() + 1 != n)
    throw std::invalid_argument("eta must have one more entry than z");
  if (n > 12) return jump_map_oracle(z, eta, GapMode::unregulated);
  std::vector<double> w(n);  // w_j = z_{j-1} + eta_j
  w[0] = eta[0];
  for (std::size_t j = 1; j < n; ++j) w[j] = z.values[j - 1] + eta[j];
  const double base = *std::min_element(w.begin(), w.end());

  GapVector out{{}, GapSpace::w_n_minus_1};
  out.values.resize(n - 1);
  // Iterate subsets by bitmask; min over subsets of each size of the max.
  std::vector<double> best(n + 1, std::numeric_limits<double>::infinity());
  for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
    const int size = __builtin_popcountll(mask);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask & (1ULL << j)) mx = std::max(mx, w[j]);
    best[size] = std::min(best[size], mx);
  }
  for (std::size_t i = 1; i < n; ++i) out.values[i - 1] = best[i + 1] - base;
  return out;
}

/// F^R_i(z, eta) = min over subsets of size i of the max of
/// max(z_j + eta_j, 0) over the subset. Literal subset enumeration.
inline GapVector jump_map_F_regulated(const GapVector& z,
                                      const std::vector<double>& eta) {
  const std::size_t n = eta.size();
  if (z.values.size() != n)
    throw std::invalid_argument("eta must match the dimension of z");
  if (n > 12) return jump_map_oracle(z, eta, GapMode::regulated);
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = std::max(z.values[j] + eta[j], 0.0);

  GapVector out{{}, GapSpace::w_n};
  out.values.resize(n);
  std::vector<double> best(n + 1, std::numeric_limits<double>::infinity());
  for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
    const int size = __builtin_popcountll(mask);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask & (1ULL << j)) mx = std::max(mx, w[j]);
    best[size] = std::min(best[size], mx);
  }
  for (std::size_t i = 1; i <= n; ++i) out.values[i - 1] = best[i];
  return out;
}

/// Market weights of the ranked particles: weight of rank i is
/// 1 / sum_j exp(X_(j) - X_(i)). Computed with a max shift for stability.
struct MarketWeights {
  std::vector<double> weights;  // by rank, sums to 1
};

inline MarketWeights market_weights(const std::vector<double>& positions) {
  if (positions.empty()) throw std::invalid_argument("positions must be nonempty");
  std::vector<double> sorted = positions;
  std::sort(sorted.begin(), sorted.end());
  const double mx = sorted.back();
  double denom = 0.0;
  for (double x : sorted) denom += std::exp(x - mx);
  MarketWeights mw;
  mw.weights.reserve(sorted.size());
  for (double x : sorted) mw.weights.push_back(std::exp(x - mx) / denom);
  return mw;
}

}  // namespace cps
