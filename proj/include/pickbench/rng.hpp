// Deterministic seeding and random streams. All randomness in the project
// flows through this header so runs are reproducible bit-for-bit on a given
// platform regardless of scheduling.
#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace pickbench {

// SplitMix64 finalizer. Good enough statistically for simulation use and
// trivially portable.
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: episode k of a run with base seed B gets
// derive_seed(B, k). Independent of worker scheduling by construction.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  return mix64(base ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
}

// Named sub-streams of an episode seed, so placement, instruction choice,
// observation permutation and policy noise are mutually independent.
enum Stream : uint64_t {
  kStreamPlacement = 1,
  kStreamInstruction = 2,
  kStreamBlindPerm = 3,
  kStreamPolicy = 4,
};

inline uint64_t substream(uint64_t episode_seed, Stream s) {
  return mix64(episode_seed + 0xD1B54A32D192ED03ULL * static_cast<uint64_t>(s));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  // standard Gaussian via Box-Muller
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Identity-blind slot permutation for an episode: a seeded uniform shuffle.
inline std::vector<int> blind_permutation(int n, uint64_t seed) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  return perm;
}

}  // namespace pickbench
