#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mclrf {

// Stream tags keep RNG streams derived from the same user seed disjoint.
enum class RngTag : std::uint64_t {
  Init = 1,
  Predict = 2,
  Pixels = 3,
  Resample = 4,
  Stratified = 5,
  Trial = 6,
  ObsNoise = 7,
  SceneNoise = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Uniform double in [0, 1) from 64 hashed bits. Platform-independent.
inline double u01_from_bits(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Deterministic generator for the stream identified by the given words,
// e.g. {seed, step, particle_index, tag}.
inline std::mt19937_64 make_stream(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x2545f4914f6cdd1dull;
  for (std::uint64_t w : words) h = hash_combine(h, w);
  return std::mt19937_64(h);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, RngTag tag) {
  return make_stream({seed, static_cast<std::uint64_t>(tag)});
}

}  // namespace mclrf
