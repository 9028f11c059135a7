#pragma once

#include <cstdint>
#include <random>

namespace maskrr {

// Deterministic seed derivation / mixing (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Portable deterministic RNG.  mt19937_64 supplies the bit stream; all
// variate transforms are written out explicitly so that sequences are
// identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) via rejection (unbiased, deterministic).
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via inverse-CDF transform of uniform_open().
  double normal();

  // Gamma(shape, scale) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape, double scale);

 private:
  std::mt19937_64 gen_;
};

// In-place Fisher-Yates shuffle driven by Rng (std::shuffle is not
// reproducible across standard libraries).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace maskrr
