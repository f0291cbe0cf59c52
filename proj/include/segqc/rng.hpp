#pragma once

#include <array>
#include <cstdint>

namespace segqc {

/// xoshiro256** (Blackman & Vigna) with its state expanded from a 64-bit seed
/// by splitmix64. Sequences are fixed by the algorithm, not by the standard
/// library, so they are identical across platforms and implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0,1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via the cosine branch of Box-Muller (two uniforms per draw).
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Stable 64-bit FNV-1a hash, used to derive per-case seeds and dataset fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace segqc
