#pragma once

#include <cstdint>
#include <string_view>

namespace avnode {

/// Stream identifiers for derive_seed. Values are part of the on-disk
/// reproducibility contract; append new ones, never renumber.
enum class Purpose : std::uint64_t {
  kGaInit = 1,
  kGaEval = 2,
  kGaOperators = 3,
  kGaImmigration = 4,
  kAbcInit = 5,
  kAbcSlot = 6,
  kReduction = 7,
  kKsSubsample = 8,
  kSynth = 9,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a; used to turn patient ids and config dumps into keys.
inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based seed schedule: every simulation and sampler stream is keyed
/// by (root, patient, segment, purpose, replicate), so results do not depend
/// on execution order or thread count.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t patient, std::uint64_t segment,
                                           Purpose purpose, std::uint64_t replicate) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ patient);
  h = splitmix64(h ^ segment);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ replicate);
  return h;
}

/// Seed scope for one patient segment.
struct SeedScope {
  std::uint64_t root = 0;
  std::uint64_t patient = 0;
  std::uint64_t segment = 0;

  std::uint64_t operator()(Purpose purpose, std::uint64_t replicate) const {
    return derive_seed(root, patient, segment, purpose, replicate);
  }
};

}  // namespace avnode
