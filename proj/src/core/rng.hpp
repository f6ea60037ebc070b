#pragma once

#include <cstdint>
#include <random>

namespace splatprint {

// splitmix64; used to derive independent stream seeds from (seed, tags...).
inline uint64_t mix_seed(uint64_t s) {
  s += 0x9e3779b97f4a7c15ull;
  s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ull;
  s = (s ^ (s >> 27)) * 0x94d049bb133111ebull;
  return s ^ (s >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag_a, uint64_t tag_b = 0) {
  return mix_seed(mix_seed(seed ^ 0x5851f42d4c957f2dull) ^ mix_seed(tag_a) ^
                  mix_seed(tag_b ^ 0xda3e39cb94b95bdbull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed, uint64_t tag_a = 0, uint64_t tag_b = 0) {
  return Rng(derive_seed(seed, tag_a, tag_b));
}

}  // namespace splatprint
