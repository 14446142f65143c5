#pragma once

// Counter-based randomness. Every random quantity in the toolkit is derived
// from a (seed, stream, index...) key so that results never depend on the
// order in which examples, repeats or grid points are processed.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace adaptcp {

namespace streams {
inline constexpr std::uint64_t calibration_u = 0x63616c;  // "cal"
inline constexpr std::uint64_t test_u = 0x747374;         // "tst"
inline constexpr std::uint64_t synth_example = 0x73796e;
inline constexpr std::uint64_t synth_transform = 0x74726e;
inline constexpr std::uint64_t synth_pilot = 0x706c74;
inline constexpr std::uint64_t split = 0x73706c;
inline constexpr std::uint64_t trial = 0x74726c;
inline constexpr std::uint64_t subset = 0x737562;
}  // namespace streams

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Uniform draw in [0,1) with 53 bits of resolution.
constexpr double uniform01(std::initializer_list<std::uint64_t> parts) noexcept {
  return static_cast<double>(hash_key(parts) >> 11) * 0x1.0p-53;
}

/// A sequential engine owned by one keyed stream (one example, one repeat...).
inline std::mt19937_64 keyed_engine(std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(hash_key(parts));
}

}  // namespace adaptcp
