#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pixelseq {

// All stochastic behavior in the project goes through this wrapper so that
// equal seeds give bit-identical runs regardless of standard library. The
// [0,1) construction uses the top 53 bits of a mt19937_64 draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // n must be > 0. Modulo bias is irrelevant at the sizes used here.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pixelseq
