#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cps {

// Seed derivation for independent substreams. The constants are fixed and
// documented here: changing them changes every simulated path, so they are
// part of the on-disk reproducibility contract.
namespace seedmix {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;  // splitmix64

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGamma;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to hash purpose tags into the seed space.
inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace seedmix

/// Derives the seed of substream (tag, index) from a master seed.
/// Injective in practice; distinct tags and indices give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tag,
                                 std::uint64_t index) {
  std::uint64_t s = seedmix::splitmix64(master_seed ^ seedmix::hash_tag(tag));
  return seedmix::splitmix64(s ^ seedmix::splitmix64(index));
}

/// A value-semantics random stream: 64-bit Mersenne engine plus cached
/// Gaussian/uniform adaptors. Copying copies the full state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double normal() { return gauss_(eng_); }
  double uniform01() { return unif_(eng_); }
  double exponential(double rate) {
    return -std::log(1.0 - unif_(eng_)) / rate;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace cps
