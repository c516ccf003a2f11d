#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace lgap {

/// SplitMix64 finalizer. Used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Per-stage seed: stage_seed = mix64(master ^ fnv1a64(stage_name)).
/// Adding a new stage never perturbs the seeds of existing ones.
constexpr std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) noexcept {
  return mix64(master ^ fnv1a64(stage));
}

/// Seed for the `index`-th item of a batch derived from `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Deterministic random source. The engine (mt19937_64) is fully specified by
/// the standard; the mappings to doubles/ranges are implemented here rather
/// than with <random> distributions, whose output is implementation-defined.
///
/// Draw mappings (each consumes the stated number of engine outputs):
///   unit()      1 draw   (x >> 11) * 2^-53, in [0, 1)
///   below(n)    >=1      rejection: accept x >= (2^64 - n) mod n, return x mod n
///   bernoulli   1 draw   unit() < p
///   normal()    2 draws  Box-Muller, cosine branch
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  bool bernoulli(double p) { return unit() < p; }

  double normal() {
    const double u1 = 1.0 - unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lgap
