#include "ddg/random.hpp"

#include <cmath>
#include <numbers>

#include "ddg/error.hpp"

namespace ddg {

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double RandomSource::next_unit() { return double(engine_() >> 11) * 0x1.0p-53; }

double RandomSource::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("uniform: requires lo <= hi");
  return lo + (hi - lo) * next_unit();
}

double RandomSource::gaussian(double mu, double sigma) {
  if (!(sigma >= 0)) throw DomainError("gaussian: requires sigma >= 0");
  if (has_spare_) {
    has_spare_ = false;
    return mu + sigma * spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mu + sigma * r * std::cos(theta);
}

std::uint64_t RandomSource::below(std::uint64_t n) {
  if (n == 0) throw DomainError("below: n must be positive");
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor draw(RandomSource& src, const Distribution& dist, const Shape& shape) {
  if (dist.kind == Distribution::Kind::uniform && !(dist.a <= dist.b)) {
    throw DomainError("draw: uniform requires lo <= hi");
  }
  if (dist.kind == Distribution::Kind::gaussian && !(dist.b >= 0)) {
    throw DomainError("draw: gaussian requires sigma >= 0");
  }
  Tensor t(shape);
  for (Scalar& v : t.data()) {
    v = Scalar(dist.kind == Distribution::Kind::uniform ? src.uniform(dist.a, dist.b)
                                                        : src.gaussian(dist.a, dist.b));
  }
  return t;
}

}  // namespace ddg
