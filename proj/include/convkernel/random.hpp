#pragma once

#include <cstdint>
#include <random>

namespace convkernel {

/// Seeded generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// mappings to integers, uniforms and normals are done here:
///   - below(n): rejection sampling on the raw 64-bit output (unbiased),
///   - uniform(): top 53 bits scaled by 2^-53, in [0, 1),
///   - normal(): Box-Muller on two uniforms, cosine branch only.
/// Integer-only consumers (observation masks) are bit-reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint64_t below(std::uint64_t n);
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace convkernel
