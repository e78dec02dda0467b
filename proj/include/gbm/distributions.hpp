#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "gbm/errors.hpp"
#include "gbm/rng.hpp"

namespace gbm {

/// A set of positive state vectors, one per column (d x n), plus provenance.
struct SampleBatch {
  Eigen::ArrayXXd values;
  long time_index = 0;
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return values.rows(); }
  Eigen::Index size() const { return values.cols(); }
};

/// Element-wise i.i.d. log-normal law LN(mu, sigma^2 I). sigma is shared
/// across coordinates. sigma == 0 only arises as the fit of constant data.
struct LogNormalParams {
  Eigen::VectorXd mu;
  double sigma = 1.0;

  static LogNormalParams isotropic(Eigen::Index dim, double mu, double sigma) {
    return {Eigen::VectorXd::Constant(dim, mu), sigma};
  }
  Eigen::Index dim() const { return mu.size(); }
};

inline void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("log-normal scale must be positive and finite, got sigma = " +
                      std::to_string(sigma));
}

/// Density of LN(mu, sigma^2) at w; zero for w <= 0.
template <typename Scalar>
Scalar lognormal_pdf(Scalar w, Scalar mu, Scalar sigma) {
  require_positive_sigma(static_cast<double>(sigma));
  if (w <= Scalar(0)) return Scalar(0);
  const Scalar z = (std::log(w) - mu) / sigma;
  return std::exp(Scalar(-0.5) * z * z) /
         (w * sigma * Scalar(std::sqrt(2.0 * std::numbers::pi)));
}

template <typename Scalar>
Scalar lognormal_log_pdf(Scalar w, Scalar mu, Scalar sigma) {
  const Scalar z = (std::log(w) - mu) / sigma;
  return Scalar(-0.5) * z * z - std::log(w) - std::log(sigma) -
         Scalar(0.5 * std::log(2.0 * std::numbers::pi));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double lognormal_cdf(double w, double mu, double sigma) {
  require_positive_sigma(sigma);
  if (w <= 0.0) return 0.0;
  return normal_cdf((std::log(w) - mu) / sigma);
}

/// n draws of exp(mu + sigma Z), deterministic in seed.
SampleBatch lognormal_sample(const LogNormalParams& params, long n, std::uint64_t seed);
SampleBatch lognormal_sample(const LogNormalParams& params, long n, Rng& rng);

struct Moments {
  double mean;
  double variance;
};

/// Mean exp(mu + s^2/2) and variance (exp(s^2) - 1) exp(2 mu + s^2) of a
/// scalar LN(mu, s^2).
Moments lognormal_moments(double mu, double sigma);

enum class FitMode {
  per_coordinate,  ///< one location per coordinate, pooled scale
  pooled,          ///< single location shared by all coordinates
};

/// Maximum-likelihood fit on log-values. Throws DomainError naming the
/// first nonpositive entry.
LogNormalParams fit_lognormal(const SampleBatch& batch, FitMode mode = FitMode::per_coordinate);

/// Throws DomainError unless every entry is strictly positive and finite.
void require_positive(const Eigen::Ref<const Eigen::ArrayXXd>& x, const char* what);

}  // namespace gbm
