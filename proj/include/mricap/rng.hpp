#pragma once

#include <cstdint>
#include <string_view>

namespace mricap {

// One round of splitmix64, used as a pure 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// xoshiro256**, seeded from a single 64-bit key via splitmix64.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t key) {
    std::uint64_t z = key;
    for (auto& w : s_) {
      z = mix64(z);
      w = z;
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Key for the random stream of one (seed, label, replication) triple.
// Each labeled stream (one per resource, plus one for scenario selection)
// depends only on the label and replication index, never on any resource
// parameters or on what else is in the system. Perturbing one resource
// therefore leaves every other stream untouched, which is the common
// random numbers property the finite-difference estimators rely on.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t label_hash,
                                std::uint64_t replication) {
  std::uint64_t k = mix64(seed ^ 0x6A09E667F3BCC909ull);
  k = mix64(k ^ label_hash);
  return mix64(k ^ replication);
}

inline Xoshiro256 stream_rng(std::uint64_t seed, std::uint64_t label_hash,
                             std::uint64_t replication) {
  return Xoshiro256(stream_key(seed, label_hash, replication));
}

}  // namespace mricap
