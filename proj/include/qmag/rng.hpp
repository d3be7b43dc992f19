#pragma once

#include <cstdint>
#include <string_view>

namespace qmag {

/// Counter-free splittable random stream built on the splitmix64 scrambler.
///
/// Every stream is a pure function of its seed, and child streams are pure
/// functions of (parent seed, label, index). Draws do not depend on platform
/// library internals, so identical seeds give identical sequences everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double();

  double next_uniform(double lo, double hi);

  /// Single Bernoulli trial with success probability p.
  bool bernoulli(double p);

  /// Child stream for a labeled sub-task. Independent of draw order on the
  /// parent, so parallel workers may derive their own streams up front.
  RngStream derive(std::string_view label, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// FNV-1a 64-bit hash of a byte string. Used for stream derivation and for
/// artifact fingerprints in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace qmag
