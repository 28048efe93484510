#pragma once

// Seeded random streams.
//
// Every stochastic decision in the pipeline (blur draws, augmentation,
// shuffles, corruption noise, weight init) draws from its own
// std::mt19937_64 whose seed is derived by hashing a tuple of integers
// (master seed, stream tag, epoch, record index, ...). Draws therefore do not
// depend on visit order or worker count.
//
// The engine output is specified by the standard; the distribution helpers
// below are written out so that draws are identical across standard library
// implementations (std::uniform_real_distribution et al. are not).

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vac {

using Rng = std::mt19937_64;

/// Stream tags; keep values stable, they feed seed derivation.
enum class Stream : std::uint64_t {
  kInit = 0x494e4954,
  kShuffle = 0x53485546,
  kBlur = 0x424c5552,
  kAugment = 0x41554731,
  kCorrupt = 0x434f5252,
  kSubset = 0x53554253,
  kSynthetic = 0x53594e54,
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-sensitive hash of a tuple of integers.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept;

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(parts));
}

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng) noexcept;

/// Unbiased integer in [0, n). n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) noexcept;

/// Standard normal via Box-Muller (one value per call, the pair's second
/// value is discarded so each call consumes exactly two engine outputs).
double standard_normal(Rng& rng) noexcept;

bool bernoulli(Rng& rng, double p) noexcept;

}  // namespace vac
