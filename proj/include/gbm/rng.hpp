#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gbm {

/// Seedable, splittable random source. Every stochastic routine in the
/// library takes one of these explicitly; there is no global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream. Depends only on (seed, stream), not on how
  /// many draws the parent has made.
  Rng split(std::uint64_t stream) const {
    return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL)));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform integer in [lo, hi].
  long uniform_int(long lo, long hi) {
    return std::uniform_int_distribution<long>(lo, hi)(engine_);
  }

  Eigen::ArrayXXd normal_array(Eigen::Index rows, Eigen::Index cols) {
    Eigen::ArrayXXd z(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal_(engine_);
    return z;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

  /// SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gbm
