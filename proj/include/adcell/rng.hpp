#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adcell/rational.hpp"

namespace adcell {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent per-trial substream: mixing keeps trial 0 of seed 1 unrelated
// to trial 1 of seed 0.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index * 0xd1342543de82ef95ULL + 1));
}

// Seeded PRNG with exact-rational event draws. A draw compares a uniform
// 64-bit integer against p scaled by 2^64, so the realized probability is
// within 2^-64 of the exact rational and every decision is reproducible
// bit-for-bit from the seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform integer in [0, bound).
  uint64_t below(uint64_t bound) { return eng_() % bound; }

  bool bernoulli(const Rat& p) {
    if (p <= 0) {
      eng_();  // consume for stream stability
      return false;
    }
    if (p >= 1) {
      eng_();
      return true;
    }
    return u64_less_than(eng_(), p);
  }

  // Categorical draw against cumulative rational weights (nondecreasing,
  // last <= 1). Returns the first k with draw < cum[k], or cum.size() for
  // the residual event.
  size_t draw_index(const std::vector<Rat>& cum) {
    const uint64_t r = eng_();
    for (size_t k = 0; k < cum.size(); ++k) {
      if (u64_less_than(r, cum[k])) return k;
    }
    return cum.size();
  }

 private:
  // r/2^64 < p, compared exactly: r * den(p) < num(p) * 2^64.
  static bool u64_less_than(uint64_t r, const Rat& p) {
    mpz_class lhs;
    mpz_import(lhs.get_mpz_t(), 1, 1, sizeof(r), 0, 0, &r);
    lhs *= p.get_den();
    mpz_class rhs = p.get_num();
    rhs <<= 64;
    return lhs < rhs;
  }

  std::mt19937_64 eng_;
};

}  // namespace adcell
