#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "fscil/mathcore.hpp"

namespace fscil {

// Deterministic random stream with a fully specified algorithm so that
// results are reproducible bit-for-bit across platforms and standard
// library implementations (std::mt19937 distributions are not portable).
//
//   state seeding   splitmix64 chain over (seed ^ fnv1a64(purpose))
//   core generator  xoshiro256** (Blackman & Vigna)
//   next_uniform    (x >> 11) * 2^-53, in [0, 1)
//   next_normal     Marsaglia polar method, second deviate cached
//   next_index      rejection sampling, unbiased over [0, n)
//
// Distinct purpose labels give independent streams for the same seed, so
// consumers (init, shuffling, data synthesis) cannot desynchronize each
// other when one of them changes how much randomness it draws.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view purpose);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_uniform();

  // Standard normal deviate.
  double next_normal();

  // n independent standard normal deviates. Throws if n == 0.
  Vec64 draw_normal(std::size_t n);

  // Uniform index in [0, n). Throws if n == 0.
  std::size_t next_index(std::size_t n);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[next_index(i)]);
    }
  }

 private:
  std::uint64_t state_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a 64-bit hash of a byte string.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace fscil
