#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ade {

// Deterministic random source. std::mt19937_64 emits a portable bit stream;
// the bounded draw, uniform and gaussian are hand-rolled because the std
// distributions are implementation-defined and would break cross-toolchain
// reproducibility of seeds, splits and trained parameters.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t below(std::size_t n);

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; caches the spare deviate.
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ade
