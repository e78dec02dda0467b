#include "gbm/sampler.hpp"

#include <string>

namespace gbm {

Eigen::ArrayXXd plain_initial_state(Eigen::Index dim, Eigen::Index n, Rng& rng) {
  return rng.normal_array(dim, n).exp();
}

Eigen::ArrayXXd fitted_initial_state(const LogNormalParams& fit, Eigen::Index n, Rng& rng) {
  return lognormal_sample(fit, static_cast<long>(n), rng).values;
}

namespace {

void guard(const Eigen::ArrayXXd& x, const StepDiagnostics& diag, const SamplerOptions& options, long k) {
  if (!x.allFinite() || !(x > 0.0).all())
    throw NumericError("sampler: state left the positive finite range at step " + std::to_string(k), k);
  if (diag.clamped_steps > options.max_clamped_steps)
    throw NumericError("sampler: exponent clamped on " + std::to_string(diag.clamped_steps) +
                           " steps (limit " + std::to_string(options.max_clamped_steps) + ")",
                       k);
}

}  // namespace

SamplerResult sample_plain(const ScoreField& score, const SdeConfig& config, Eigen::ArrayXXd init,
                           Rng& rng, const SamplerOptions& options) {
  config.validate();
  require_positive(init, "sample_plain");
  SamplerResult r{std::move(init), {}};
  for (long k = config.n_steps - 1; k >= 1; --k) {
    r.samples = reverse_step(r.samples, k, score, config, rng, 1.0, &r.diagnostics);
    guard(r.samples, r.diagnostics, options, k);
    if (options.observer) options.observer(k - 1, r.samples);
  }
  return r;
}

SamplerResult sample_annealed(const ScoreField& score, const SdeConfig& config,
                              const AnnealConfig& anneal, Eigen::ArrayXXd init, Rng& rng,
                              const SamplerOptions& options) {
  config.validate();
  require_positive(init, "sample_annealed");
  if (anneal.inner_steps < 1) throw DomainError("sample_annealed: inner_steps must be >= 1");
  if (!(anneal.chi > 0.0) || !(anneal.kappa0 >= 0.0) || !(anneal.step > 0.0))
    throw DomainError("sample_annealed: need chi > 0, kappa0 >= 0, step > 0");
  SdeConfig step_config = config;
  step_config.delta = anneal.step;

  SamplerResult r{std::move(init), {}};
  double kappa = anneal.kappa0;
  for (long k = config.n_steps - 1; k >= 1; --k) {
    for (int j = 0; j < anneal.inner_steps; ++j) {
      r.samples = reverse_step(r.samples, k, score, step_config, rng, kappa, &r.diagnostics);
      guard(r.samples, r.diagnostics, options, k);
    }
    kappa *= anneal.chi;
    if (options.observer) options.observer(k - 1, r.samples);
  }
  return r;
}

}  // namespace gbm
