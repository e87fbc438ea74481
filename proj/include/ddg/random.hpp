#pragma once

#include <cstdint>
#include <random>

#include "ddg/tensor.hpp"

namespace ddg {

/// Seeded generator built on std::mt19937_64, whose raw output sequence is
/// fixed by the C++ standard. Uniform and Gaussian transforms are done here
/// (53-bit mantissa fill, Box-Muller) rather than with <random>
/// distributions, whose outputs differ between standard libraries.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double next_unit();
  double uniform(double lo, double hi);
  double gaussian(double mu, double sigma);
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless 64-bit mixer used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct Distribution {
  enum class Kind { uniform, gaussian };
  Kind kind;
  double a;  // lo or mu
  double b;  // hi or sigma

  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Distribution gaussian(double mu, double sigma) { return {Kind::gaussian, mu, sigma}; }
};

Tensor draw(RandomSource& src, const Distribution& dist, const Shape& shape);

}  // namespace ddg
