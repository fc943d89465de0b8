#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cps/jump_law.hpp"
#include "cps/system.hpp"

namespace cps {

/// Outcome of one drift-domination check. The comparison is strict: the
/// theory's conditions use "<", so margin must be positive. A failed check
/// means "outside the proven regime", not that the system diverges; the
/// conditions are known not to be sharp.
struct ConditionReport {
  bool satisfied = false;
  double lhs = 0.0;        // rate * E|J|
  double threshold = 0.0;  // right-hand side of the condition
  double margin = 0.0;     // threshold - lhs
  std::string notes;

  static ConditionReport strict(double lhs, double threshold, std::string notes) {
    ConditionReport r;
    r.lhs = lhs;
    r.threshold = threshold;
    r.margin = threshold - lhs;
    r.satisfied = r.margin > 0.0;
    if (!r.satisfied && r.notes.empty())
      r.notes = "outside proven regime" + (notes.empty() ? "" : "; " + notes);
    else
      r.notes = std::move(notes);
    return r;
  }
};

/// Unregulated finite system: rate * E|J| < (1/N) min_i (delta_i - delta_{i+1}).
inline ConditionReport check_unregulated(const SystemParams& params,
                                         const JumpLaw& law) {
  if (params.n < 2) throw std::invalid_argument("unregulated check needs N >= 2");
  double min_drop = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < params.n; ++i)
    min_drop = std::min(min_drop, params.deltas[i] - params.deltas[i + 1]);
  return ConditionReport::strict(expected_abs_jump_per_unit_time(law),
                                 min_drop / params.n,
                                 "unregulated gap process, unique invariant law");
}

/// Regulated finite system: the threshold additionally includes -delta_1.
inline ConditionReport check_regulated(const SystemParams& params,
                                       const JumpLaw& law) {
  if (params.n < 1) throw std::invalid_argument("regulated check needs N >= 1");
  if (!params.barrier) throw std::invalid_argument("regulated check needs a barrier");
  double m = -params.deltas[0];
  for (int i = 0; i + 1 < params.n; ++i)
    m = std::min(m, params.deltas[i] - params.deltas[i + 1]);
  return ConditionReport::strict(expected_abs_jump_per_unit_time(law),
                                 m / params.n,
                                 "regulated gap process, unique invariant law");
}

/// Infinite regulated system: rate * E|J| < -delta_1.
inline ConditionReport check_infinite_regulated(const JumpLaw& law, double delta1) {
  return ConditionReport::strict(expected_abs_jump_per_unit_time(law), -delta1,
                                 "infinite regulated gap process, tightness");
}

/// Initial condition of the infinite system: an explicit nondecreasing
/// prefix plus the linear tail rule X_i(0) >= gamma1 * i + gamma2.
struct InitialReport {
  bool in_w = false;          // liminf z_i / i > 0
  bool linear_growth = false; // gamma1 > 0
  std::string notes;
};

inline InitialReport check_infinite_initial(const std::vector<double>& prefix,
                                            double gamma1, double gamma2) {
  for (std::size_t i = 1; i < prefix.size(); ++i)
    if (prefix[i] < prefix[i - 1])
      throw std::invalid_argument("initial prefix must be nondecreasing");
  InitialReport rep;
  rep.linear_growth = gamma1 > 0.0;
  // the linear tail dominates any finite prefix, so liminf z_i/i = gamma1
  rep.in_w = rep.linear_growth;
  rep.notes = rep.linear_growth
                  ? "tail grows linearly; initial condition lies in W"
                  : "gamma1 <= 0: liminf z_i/i may vanish, summability can fail";
  (void)gamma2;
  return rep;
}

/// Validates the standing assumptions: positive volatilities, mean-zero
/// integrable jump law and, for infinite systems, the tail-constancy of the
/// coefficients (with negative constant drift in the regulated case).
struct AssumptionReport {
  bool valid = true;
  std::vector<std::string> issues;

  void fail(std::string msg) {
    valid = false;
    issues.push_back(std::move(msg));
  }
};

inline AssumptionReport check_assumptions(const SystemParams& params,
                                          const JumpLaw& law, bool infinite,
                                          int tail_index_m = 1) {
  AssumptionReport rep;
  for (double s : params.sigmas)
    if (!(s > 0.0)) rep.fail("volatilities must be positive");
  const LawValidation lv = validate_law(law);
  if (!lv.valid)
    for (const auto& s : lv.issues) rep.fail("jump law: " + s);
  if (infinite) {
    if (tail_index_m < 1 || tail_index_m > params.n)
      rep.fail("tail index M must lie in 1..n");
    for (int i = std::max(tail_index_m, 1); i < params.n; ++i)
      if (params.deltas[i] != params.deltas[tail_index_m - 1])
        rep.fail("drifts must be constant from rank M on");
    for (int i = 1; i < params.n; ++i)
      if (params.sigmas[i] != params.sigmas[0])
        rep.fail("volatilities must be constant for infinite systems");
    if (params.barrier) {
      for (int i = 1; i < params.n; ++i)
        if (params.deltas[i] != params.deltas[0])
          rep.fail("regulated infinite systems need constant drifts");
      if (!(params.deltas[0] < 0.0))
        rep.fail("regulated infinite systems need 0 > delta_1");
    }
  }
  return rep;
}

}  // namespace cps
