#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "diffmvr/numerics/tensor.hpp"

namespace diffmvr {

/// Deterministic generator: xoshiro256** seeded through splitmix64.
///
/// Gaussian draws use the Box-Muller transform; the second variate of each
/// pair is cached, so the stream depends only on the seed and call order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    seed_ = seed;
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    has_spare_ = false;
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  template <class T = float>
  BasicTensor<T> normal_tensor(const Shape& shape, double stddev = 1.0) {
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<T>(normal() * stddev);
    return BasicTensor<T>::from(shape, std::move(values));
  }

  template <class T = float>
  BasicTensor<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<T>(uniform(lo, hi));
    return BasicTensor<T>::from(shape, std::move(values));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_ = 0;
  std::uint64_t state_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace diffmvr
