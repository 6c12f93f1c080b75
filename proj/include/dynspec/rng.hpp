#pragma once

#include <cstdint>
#include <string_view>

namespace dynspec {

/// Deterministic 64-bit generator (splitmix64, Steele et al. constants).
/// Independent streams are derived from (seed, tag) by folding an FNV-1a hash
/// of the tag into the seed, so every builder that draws randomness gets its
/// own reproducible sequence from one user-facing seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  static Rng stream(std::uint64_t seed, std::string_view tag) {
    return Rng(seed ^ hash_tag(tag));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 significant bits.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= bound);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dynspec
