#include "vac/random.hpp"

#include <cmath>
#include <numbers>

namespace vac {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) noexcept {
  // [threshold, 2^64) holds an exact multiple of n values.
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
  std::uint64_t x = rng();
  while (x < threshold) x = rng();
  return x % n;
}

double standard_normal(Rng& rng) noexcept {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool bernoulli(Rng& rng, double p) noexcept {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return uniform01(rng) < p;
}

}  // namespace vac
