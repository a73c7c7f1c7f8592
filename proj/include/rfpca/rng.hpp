#ifndef RFPCA_RNG_HPP
#define RFPCA_RNG_HPP

#include <cstdint>
#include <random>

namespace rfpca {

struct RngSeed {
  std::uint64_t value = 0;
};

/// Seedable random stream with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The variate transforms are implemented here rather than taken
/// from <random>, whose distributions are implementation-defined, so a seed
/// yields bit-identical samples on every conforming toolchain.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by the Marsaglia polar method.
  double normal();

  /// Gam(shape, rate) by Marsaglia–Tsang, with the usual boost for shape < 1.
  double gamma(double shape, double rate);

  double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed for replicate `index` of a run seeded with `base`: base + 1000003 * index.
inline RngSeed replicate_seed(RngSeed base, std::uint64_t index) {
  return RngSeed{base.value + 1000003ULL * index};
}

}  // namespace rfpca

#endif  // RFPCA_RNG_HPP
