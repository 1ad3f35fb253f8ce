#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bfln {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes a base seed with stream tags (client, round, purpose, ...) so every
// consumer of randomness gets an independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

using Rng = std::mt19937_64;

// Stream tags.
namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t partition = 2;
inline constexpr std::uint64_t holdout = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t batches = 5;
inline constexpr std::uint64_t probe = 6;
inline constexpr std::uint64_t kmeans = 7;
inline constexpr std::uint64_t gradcheck = 8;
}  // namespace stream

}  // namespace bfln
