#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cps/rng.hpp"

namespace cps {

enum class JumpKind { two_point, uniform_symmetric, laplace, discrete_table };

inline std::string to_string(JumpKind k) {
  switch (k) {
    case JumpKind::two_point: return "two_point";
    case JumpKind::uniform_symmetric: return "uniform_symmetric";
    case JumpKind::laplace: return "laplace";
    case JumpKind::discrete_table: return "discrete_table";
  }
  return "?";
}

inline JumpKind jump_kind_from_string(const std::string& s) {
  if (s == "two_point") return JumpKind::two_point;
  if (s == "uniform_symmetric") return JumpKind::uniform_symmetric;
  if (s == "laplace") return JumpKind::laplace;
  if (s == "discrete_table") return JumpKind::discrete_table;
  throw std::invalid_argument("unknown jump law kind: " + s);
}

/// Law of the driving pure-jump noise: a jump-size distribution plus a
/// Poisson rate of jumps per unit time. All supported kinds have closed-form
/// mean and mean absolute value; the mean must be zero.
///
/// params by kind:
///   two_point:         {up, down, p_up}  -> up w.p. p_up, down w.p. 1-p_up
///   uniform_symmetric: {a}               -> Uniform[-a, a]
///   laplace:           {scale}
///   discrete_table:    {v1, p1, v2, p2, ...}
struct JumpLaw {
  JumpKind kind = JumpKind::two_point;
  std::vector<double> params;
  double rate = 0.0;
};

inline JumpLaw two_point_law(double up, double down, double p_up, double rate) {
  return JumpLaw{JumpKind::two_point, {up, down, p_up}, rate};
}

/// Symmetric +/-a two-point law, the workhorse in tests.
inline JumpLaw symmetric_two_point(double a, double rate) {
  return two_point_law(a, -a, 0.5, rate);
}

namespace detail {

inline void require_params(const JumpLaw& law, std::size_t n) {
  if (law.params.size() != n)
    throw std::invalid_argument("jump law " + to_string(law.kind) + " expects " +
                                std::to_string(n) + " parameters");
}

inline void check_table(const JumpLaw& law) {
  if (law.params.empty() || law.params.size() % 2 != 0)
    throw std::invalid_argument("discrete_table expects (value, weight) pairs");
}

}  // namespace detail

/// E[J] of a single jump, in closed form.
inline double jump_mean(const JumpLaw& law) {
  switch (law.kind) {
    case JumpKind::two_point: {
      detail::require_params(law, 3);
      const double up = law.params[0], down = law.params[1], p = law.params[2];
      return p * up + (1.0 - p) * down;
    }
    case JumpKind::uniform_symmetric:
      detail::require_params(law, 1);
      return 0.0;
    case JumpKind::laplace:
      detail::require_params(law, 1);
      return 0.0;
    case JumpKind::discrete_table: {
      detail::check_table(law);
      double m = 0.0, w = 0.0;
      for (std::size_t i = 0; i + 1 < law.params.size(); i += 2) {
        m += law.params[i] * law.params[i + 1];
        w += law.params[i + 1];
      }
      return m / w;
    }
  }
  throw std::invalid_argument("unsupported jump law kind");
}

/// E|J| of a single jump, in closed form.
inline double jump_mean_abs(const JumpLaw& law) {
  switch (law.kind) {
    case JumpKind::two_point: {
      detail::require_params(law, 3);
      const double up = law.params[0], down = law.params[1], p = law.params[2];
      return p * std::abs(up) + (1.0 - p) * std::abs(down);
    }
    case JumpKind::uniform_symmetric:
      detail::require_params(law, 1);
      return std::abs(law.params[0]) / 2.0;
    case JumpKind::laplace:
      detail::require_params(law, 1);
      return std::abs(law.params[0]);
    case JumpKind::discrete_table: {
      detail::check_table(law);
      double m = 0.0, w = 0.0;
      for (std::size_t i = 0; i + 1 < law.params.size(); i += 2) {
        m += std::abs(law.params[i]) * law.params[i + 1];
        w += law.params[i + 1];
      }
      return m / w;
    }
  }
  throw std::invalid_argument("unsupported jump law kind");
}

/// rate * E|J|: the expected accumulated jump magnitude per unit time, the
/// left-hand side of the drift-domination conditions.
inline double expected_abs_jump_per_unit_time(const JumpLaw& law) {
  if (law.rate == 0.0) return 0.0;
  return law.rate * jump_mean_abs(law);
}

struct LawValidation {
  bool valid = true;
  std::vector<std::string> issues;

  void fail(std::string msg) {
    valid = false;
    issues.push_back(std::move(msg));
  }
};

/// Reports mean-zero violations (|mean| > 1e-12), negative rates and
/// malformed parameters. Never throws.
inline LawValidation validate_law(const JumpLaw& law) {
  LawValidation report;
  if (law.rate < 0.0) report.fail("rate must be nonnegative");
  if (!(law.rate < std::numeric_limits<double>::infinity()))
    report.fail("rate must be finite");
  try {
    const double m = jump_mean(law);
    if (std::abs(m) > 1e-12)
      report.fail("jump size mean is " + std::to_string(m) + ", expected 0");
    if (!std::isfinite(jump_mean_abs(law)))
      report.fail("jump size distribution is not integrable");
    if (law.kind == JumpKind::two_point &&
        (law.params[2] < 0.0 || law.params[2] > 1.0))
      report.fail("two_point probability outside [0, 1]");
    if (law.kind == JumpKind::discrete_table) {
      for (std::size_t i = 1; i < law.params.size(); i += 2)
        if (law.params[i] < 0.0) report.fail("negative weight in discrete_table");
    }
  } catch (const std::exception& e) {
    report.fail(e.what());
  }
  return report;
}

/// Draws one jump size. Valid law required.
inline double sample_jump_size(const JumpLaw& law, Rng& rng) {
  switch (law.kind) {
    case JumpKind::two_point:
      return rng.uniform01() < law.params[2] ? law.params[0] : law.params[1];
    case JumpKind::uniform_symmetric: {
      const double a = law.params[0];
      return a * (2.0 * rng.uniform01() - 1.0);
    }
    case JumpKind::laplace: {
      const double u = rng.uniform01() - 0.5;
      return -law.params[0] * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
    }
    case JumpKind::discrete_table: {
      double total = 0.0;
      for (std::size_t i = 1; i < law.params.size(); i += 2) total += law.params[i];
      double u = rng.uniform01() * total;
      for (std::size_t i = 0; i + 1 < law.params.size(); i += 2) {
        u -= law.params[i + 1];
        if (u <= 0.0) return law.params[i];
      }
      return law.params[law.params.size() - 2];
    }
  }
  throw std::invalid_argument("unsupported jump law kind");
}

}  // namespace cps
