#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace commkit {

// Deterministic RNG. mt19937_64 output is pinned by the standard; all
// transforms (uniform, normal, bounded ints, shuffling) are hand-rolled here
// so streams are bit-identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal();

  // uniform in [0, n), rejection-corrected for modulo bias
  std::uint64_t uniform_int(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace commkit
