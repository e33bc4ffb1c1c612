#include "mouthtrace/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mouthtrace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

float Rng::uniform_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // Rejection on the biased tail of the 64-bit range.
  const std::uint64_t limit = -n % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= limit) return r % n;
  }
}

Rng Rng::substream(std::uint64_t a, std::uint64_t b) const {
  std::uint64_t state = seed_ ^ 0xD1B54A32D192ED03ULL;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ (a * 0x9E3779B97F4A7C15ULL);
  mixed = splitmix64(state);
  state = mixed ^ (b * 0xC2B2AE3D27D4EB4FULL);
  return Rng(splitmix64(state));
}

Tensor rng_uniform(Rng& rng, const Shape& shape) {
  Tensor out(shape);
  for (auto& v : out.data()) v = rng.uniform_float();
  return out;
}

Tensor rng_normal(Rng& rng, const Shape& shape, float mean, float stddev) {
  if (stddev < 0.0f) throw std::invalid_argument("rng_normal: negative stddev");
  Tensor out(shape);
  for (auto& v : out.data()) v = static_cast<float>(mean + stddev * rng.normal());
  return out;
}

}  // namespace mouthtrace
