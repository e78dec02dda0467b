#pragma once

#include <functional>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/rng.hpp"
#include "gbm/score_field.hpp"
#include "gbm/sde.hpp"

namespace gbm {

/// Step-size annealing for the reverse sampler: `inner_steps` updates per
/// level, noise amplitude kappa multiplied by `chi` after each level.
struct AnnealConfig {
  double chi = 0.995;
  int inner_steps = 3;
  double kappa0 = 1.0;
  /// Step taken by each update; the score is still queried on the
  /// SdeConfig grid.
  double step = 2e-4;
};

struct SamplerOptions {
  /// Steps with clamped exponents tolerated before raising NumericError.
  long max_clamped_steps = 10;
  /// Called after each level with (k, state); k = 0 for the final output.
  std::function<void(long, const Eigen::ArrayXXd&)> observer;
};

struct SamplerResult {
  Eigen::ArrayXXd samples;
  StepDiagnostics diagnostics;
};

/// X_{N-1} = exp(Z).
Eigen::ArrayXXd plain_initial_state(Eigen::Index dim, Eigen::Index n, Rng& rng);

/// X_{N-1} ~ LN(mu_hat, sigma_hat^2 I).
Eigen::ArrayXXd fitted_initial_state(const LogNormalParams& fit, Eigen::Index n, Rng& rng);

/// Reverse iteration k = N-1 down to 1 with one reverse_step per level.
SamplerResult sample_plain(const ScoreField& score, const SdeConfig& config, Eigen::ArrayXXd init,
                           Rng& rng, const SamplerOptions& options = {});

/// Reverse iteration with L inner steps per level and geometric noise decay.
SamplerResult sample_annealed(const ScoreField& score, const SdeConfig& config,
                              const AnnealConfig& anneal, Eigen::ArrayXXd init, Rng& rng,
                              const SamplerOptions& options = {});

}  // namespace gbm
