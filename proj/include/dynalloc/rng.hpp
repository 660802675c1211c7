#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dynalloc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mixes a master seed with a sequence of stream coordinates (path index,
/// replica index, rebalance date, ...). Every coordinate tuple gets its own
/// statistically independent stream, so results do not depend on the order
/// in which streams are consumed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master ^ 0x5eed5eed5eed5eedULL);
  for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  return Engine(derive_seed(master, coords));
}

}  // namespace dynalloc
