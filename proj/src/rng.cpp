#include "qmag/rng.hpp"

#include <stdexcept>

namespace qmag {

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

bool RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("bernoulli: p must lie in [0, 1]");
  }
  return next_double() < p;
}

RngStream RngStream::derive(std::string_view label, std::uint64_t index) const {
  std::uint64_t child = mix64(seed_ ^ fnv1a64(label));
  child = mix64(child + kGolden * (index + 1));
  return RngStream(child);
}

}  // namespace qmag
