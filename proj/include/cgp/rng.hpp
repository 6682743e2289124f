#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cgp {

/// Seeded random stream.
///
/// Sub-streams are derived by hashing (seed, tag) and never advance the
/// parent, so the draws a component sees do not depend on how many draws
/// other components made. The engine relies on this for its determinism and
/// k=1 equivalence guarantees.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, no cached pair).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  Rng derive(std::uint64_t tag) const;
  Rng derive(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cgp
