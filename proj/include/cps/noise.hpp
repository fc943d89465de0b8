#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cps/jump_law.hpp"
#include "cps/rng.hpp"

namespace cps {

struct JumpEvent {
  double time;
  double size;
};

/// Compound-Poisson jump schedule on [0, horizon]: exponential interarrivals
/// at law.rate, i.i.d. sizes from the law. Regenerating with the same
/// (master_seed, stream_id, horizon) reproduces the schedule bit-exactly;
/// the schedule engine is independent of the Brownian engine.
inline std::vector<JumpEvent> sample_jump_schedule(std::uint64_t master_seed,
                                                   std::uint64_t stream_id,
                                                   const JumpLaw& law,
                                                   double horizon) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be nonnegative");
  std::vector<JumpEvent> events;
  if (law.rate <= 0.0) return events;
  Rng rng(derive_seed(master_seed, "jump-schedule", stream_id));
  double t = rng.exponential(law.rate);
  while (t <= horizon) {
    events.push_back({t, sample_jump_size(law, rng)});
    t += rng.exponential(law.rate);
  }
  return events;
}

/// Driving noise of one particle: a seeded Brownian substream plus a
/// pregenerated jump schedule. Plain value type; independent streams share
/// no state and can be moved between workers.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t master_seed, std::uint64_t stream_id,
              const JumpLaw& law, double horizon)
      : stream_id_(stream_id),
        rng_(derive_seed(master_seed, "brownian", stream_id)),
        jumps_(sample_jump_schedule(master_seed, stream_id, law, horizon)) {}

  std::uint64_t stream_id() const { return stream_id_; }
  const std::vector<JumpEvent>& jumps() const { return jumps_; }

  double normal() { return rng_.normal(); }
  double uniform01() { return rng_.uniform01(); }

 private:
  std::uint64_t stream_id_;
  Rng rng_;
  std::vector<JumpEvent> jumps_;
};

/// sigma * sqrt(dt) * N(0,1) from the stream's Brownian substream.
inline double sample_brownian_increment(NoiseStream& stream, double dt,
                                        double sigma) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
  const double z = stream.normal();
  return sigma * std::sqrt(dt) * z;
}

}  // namespace cps
