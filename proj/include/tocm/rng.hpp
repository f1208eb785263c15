#pragma once

// Counter-based seeded random generator. Every stochastic consumer in the
// project owns one Rng derived from the root seed plus a label, so adding a
// new consumer never shifts the draws of existing ones.

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace tocm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_label(std::string_view label) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Rng {
 public:
  Rng(uint64_t root_seed, std::string_view label)
      : key_(splitmix64(root_seed ^ splitmix64(hash_label(label)))) {}

  uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Index drawn from an unnormalized non-negative weight vector.
  int categorical(std::span<const float> probs) {
    double total = 0.0;
    for (float p : probs) total += p;
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return int(i);
    }
    return int(probs.size()) - 1;
  }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace tocm
