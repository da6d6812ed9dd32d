#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace twotier {

using Rng = std::mt19937_64;

// splitmix64 finaliser; derives independent stream seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform on [0,1) with 53 random bits; identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int sample_discrete(const std::vector<double>& probs, Rng& rng) {
  double u = uniform01(rng), acc = 0.0;
  int last = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}

inline int sample_poisson(double rate, Rng& rng) {
  if (rate <= 0.0) return 0;
  double limit = std::exp(-rate), prod = uniform01(rng);
  int k = 0;
  while (prod > limit) {
    prod *= uniform01(rng);
    ++k;
  }
  return k;
}

inline double sample_exponential(double mean, Rng& rng) { return -mean * std::log1p(-uniform01(rng)); }

}  // namespace twotier
