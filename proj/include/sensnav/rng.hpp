#pragma once
// Portable seeded randomness.
//
// Every random draw in the project goes through Rng so that results are
// reproducible across standard libraries: the engine is std::mt19937_64
// (whose output sequence is fixed by the C++ standard) and all conversions
// to floats/integers are done here instead of by <random> distributions,
// whose algorithms are implementation-defined.
//
// Sub-streams are derived with SplitMix64 from (seed, index...) so that
// parallel and serial consumers draw identical numbers.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sensnav {

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic stream id from a base seed and a list of indices.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> indices);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] (inclusive), unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Index drawn from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sensnav
