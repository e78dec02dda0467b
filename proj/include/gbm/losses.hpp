#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gbm/rng.hpp"
#include "gbm/score.hpp"
#include "gbm/scorenet.hpp"
#include "gbm/sde.hpp"

namespace gbm {

/// Clean states, their noised versions and the step index of each column.
struct TrainingBatch {
  Eigen::ArrayXXd x0;
  Eigen::ArrayXXd xt;
  std::vector<long> steps;
};

/// Draws k uniformly from {1, ..., N-1} per column and noises x0 to t = k delta
/// with the closed-form forward solution.
TrainingBatch make_training_batch(const Eigen::ArrayXXd& x0, const SdeConfig& config, Rng& rng);

/// Same, with every column at step k.
TrainingBatch make_training_batch(const Eigen::ArrayXXd& x0, long k, const SdeConfig& config, Rng& rng);

/// Per-step loss weight lambda(k); the default is 1.
using StepWeight = std::function<double(long)>;

struct MdsmOptions {
  /// Targets are clamped to |target|_inf <= target_clip; <= 0 disables.
  double target_clip = 1e3;
  StepWeight weight;
};

struct LossReport {
  double loss = 0.0;
  double target_term = 0.0;     ///< mean 1/2 |x o grad log p(x_t|x_0)|^2
  double quadratic_term = 0.0;  ///< mean 1/2 |x o s|^2
  double cross_term = 0.0;      ///< mean <x o grad log p(x_t|x_0), x o s>
  long batch_size = 0;
  std::vector<long> steps;
  long clip_count = 0;
  /// dL/dh for h = x o s, one column per sample (only from the network overload).
  Eigen::MatrixXd output_grad;
};

/// Monte-Carlo multiplicative denoising score-matching loss
///   mean_i lambda(k_i) 1/2 |x_t o grad log p(x_t | x_0) - x_t o s(x_t, k_i)|^2
/// for a network; fills `cache` so that net.backward(report.output_grad, cache)
/// gives the parameter gradient.
LossReport mdsm_loss(const ScoreNet<double>& net, const TrainingBatch& batch, const SdeConfig& config,
                     const MdsmOptions& options = {}, ScoreNet<double>::Cache* cache = nullptr);

/// Same estimator for any score field (no gradient).
LossReport mdsm_loss(const ScoreField& model, const TrainingBatch& batch, const SdeConfig& config,
                     const MdsmOptions& options = {});

struct QuadratureSpec {
  int order = 40;
};

/// Multiplicative explicit score matching at step k,
///   E_{x ~ p_k} 1/2 |x o grad log p_k(x) - x o s(x, k)|^2,
/// by Gauss-Hermite quadrature in log space. Supports d = 1 and d = 2.
double mesm_loss(const ScoreField& model, const LogNormalMixtureScore& truth, long k,
                 const QuadratureSpec& quad = {});

/// Multiplicative denoising score matching at a fixed step k >= 1 by
/// quadrature over (log x_0, log x_t). Supports d = 1 and d = 2.
LossReport mdsm_quadrature(const ScoreField& model, const LogNormalMixtureScore& truth, long k,
                           const QuadratureSpec& quad = {});

/// Non-negative-data score matching: mesm_loss at step 0.
double hyvarinen_nn_loss(const ScoreField& model, const LogNormalMixtureScore& truth,
                         const QuadratureSpec& quad = {});

}  // namespace gbm
