#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lctc {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of a named substream ("data", "init", "batch", "selection", ...)
/// derived from the run's root seed.
constexpr std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                                       std::uint64_t index = 0) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(root) ^ h ^ mix64(index + 0x51ed2701ULL));
}

using Rng = std::mt19937_64;

}  // namespace lctc
