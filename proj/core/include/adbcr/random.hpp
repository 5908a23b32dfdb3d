#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace adbcr {

// 64-bit FNV-1a; used for seed derivation and configuration fingerprints.
constexpr std::uint64_t fnv1a(std::string_view text,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Independent generator for a named purpose ("init", "batching", "dropout",
// "dgp", ...) derived from one user-facing seed.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace adbcr
