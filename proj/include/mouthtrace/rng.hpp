#pragma once

#include <array>
#include <cstdint>

#include "mouthtrace/tensor.hpp"

namespace mouthtrace {

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded through splitmix64.
///
/// Streams are fully specified by the seed, so they are identical on every
/// platform. Normal variates use the Box-Muller cosine branch on two
/// consecutive uniforms: z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// 53-bit uniform in [0, 1).
  double uniform();
  /// 24-bit uniform in [0, 1); exact in float.
  float uniform_float();
  double normal();
  /// Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator keyed by (a, b). Depends only on the seed, never
  /// on how many values this generator has already produced.
  Rng substream(std::uint64_t a, std::uint64_t b = 0) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

Tensor rng_uniform(Rng& rng, const Shape& shape);
Tensor rng_normal(Rng& rng, const Shape& shape, float mean, float stddev);

/// In-place Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace mouthtrace
