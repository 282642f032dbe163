#pragma once

#include <cstdint>
#include <random>

namespace ksb {

// All sampling takes an explicit generator. Independent streams are derived
// from a 64-bit master seed with derive_seed().
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under `master`. Cell i of a sweep uses
// derive_seed(master, i).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Fresh generator for a child stream; advances the parent.
inline Rng split(Rng& parent) { return Rng(mix64(parent())); }

}  // namespace ksb
