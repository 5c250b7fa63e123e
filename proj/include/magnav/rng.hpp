#pragma once

#include <cmath>
#include <cstdint>

namespace magnav {

// Deterministic across platforms and standard library versions, which the
// stock <random> distributions are not.  xoshiro256++ core, splitmix64 for
// seeding and stream derivation.

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
    has_spare_ = false;
    spare_ = 0.0;
  }

  // Independent stream addressed by tag, e.g. one per subsystem.
  Rng child(uint64_t tag) const {
    uint64_t sm = s_[0] ^ (s_[2] * 0x9e3779b97f4a7c15ULL) ^ tag;
    uint64_t mixed = splitmix64_next(sm);
    uint64_t sm2 = mixed ^ (tag * 0xda942042e4dd58b5ULL);
    return Rng(splitmix64_next(sm2));
  }

  Rng child(const char* tag) const {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (const char* p = tag; *p; ++p)
      h = (h ^ static_cast<unsigned char>(*p)) * 1099511628211ULL;
    return child(h);
  }

  uint64_t next_u64() {
    uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n), rejection sampled
  uint64_t uniform_below(uint64_t n) {
    uint64_t threshold = (-n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_below(
                    static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }

  // Box-Muller with cached second value
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool operator==(const Rng& other) const {
    return s_[0] == other.s_[0] && s_[1] == other.s_[1] &&
           s_[2] == other.s_[2] && s_[3] == other.s_[3] &&
           has_spare_ == other.has_spare_ && spare_ == other.spare_;
  }

  // Serialization hooks for checkpointing
  void save_state(uint64_t out[6]) const {
    out[0] = s_[0];
    out[1] = s_[1];
    out[2] = s_[2];
    out[3] = s_[3];
    out[4] = has_spare_ ? 1 : 0;
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(spare_));
    __builtin_memcpy(&bits, &spare_, sizeof(bits));
    out[5] = bits;
  }

  void load_state(const uint64_t in[6]) {
    s_[0] = in[0];
    s_[1] = in[1];
    s_[2] = in[2];
    s_[3] = in[3];
    has_spare_ = in[4] != 0;
    __builtin_memcpy(&spare_, &in[5], sizeof(spare_));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  bool has_spare_;
  double spare_;
};

}  // namespace magnav
