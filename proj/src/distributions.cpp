#include "gbm/distributions.hpp"

#include <sstream>

namespace gbm {

void require_positive(const Eigen::Ref<const Eigen::ArrayXXd>& x, const char* what) {
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << what << ": entry (coordinate " << i << ", sample " << j
           << ") must be strictly positive and finite, got " << v;
        throw DomainError(os.str());
      }
    }
}

SampleBatch lognormal_sample(const LogNormalParams& params, long n, Rng& rng) {
  require_positive_sigma(params.sigma);
  if (n < 1) throw DomainError("lognormal_sample: n must be >= 1");
  const Eigen::Index d = params.dim();
  Eigen::ArrayXXd z = rng.normal_array(d, n);
  SampleBatch out;
  out.values = ((params.sigma * z).colwise() + params.mu.array()).exp();
  out.seed = rng.seed();
  return out;
}

SampleBatch lognormal_sample(const LogNormalParams& params, long n, std::uint64_t seed) {
  Rng rng(seed);
  return lognormal_sample(params, n, rng);
}

Moments lognormal_moments(double mu, double sigma) {
  require_positive_sigma(sigma);
  const double s2 = sigma * sigma;
  return {std::exp(mu + 0.5 * s2), std::expm1(s2) * std::exp(2.0 * mu + s2)};
}

LogNormalParams fit_lognormal(const SampleBatch& batch, FitMode mode) {
  if (batch.size() < 1 || batch.dim() < 1) throw DomainError("fit_lognormal: empty batch");
  require_positive(batch.values, "fit_lognormal");
  const Eigen::ArrayXXd logs = batch.values.log();
  const double count = static_cast<double>(logs.size());

  LogNormalParams p;
  if (mode == FitMode::pooled) {
    const double m = logs.mean();
    p.mu = Eigen::VectorXd::Constant(batch.dim(), m);
  } else {
    p.mu = logs.rowwise().mean().matrix();
  }
  const double ss = (logs.colwise() - p.mu.array()).square().sum();
  p.sigma = std::sqrt(ss / count);
  return p;
}

}  // namespace gbm
