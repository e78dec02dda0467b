#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/errors.hpp"
#include "gbm/rng.hpp"
#include "gbm/score_field.hpp"

namespace gbm {

/// Constant in the reverse-time drift: 3 sigma^2 / 2 (derived) or
/// sigma^2 / 2 (alg1).
enum class DriftVariant { derived, alg1 };

/// Element-wise GBM  dX = mu o X dt + sigma X o dW  on a uniform grid.
/// mu has either one entry (broadcast) or one per coordinate.
struct SdeConfig {
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(1, 0.32);
  double sigma = 0.8;
  long n_steps = 1000;
  double delta = 0.001;
  DriftVariant drift_variant = DriftVariant::derived;
  /// Clamp each per-step exponent to [-exponent_limit, exponent_limit].
  bool clamp_exponent = true;
  double exponent_limit = 50.0;

  /// mu = (sigma^2 / 2) 1, i.e. zero drift for log X.
  static SdeConfig zero_log_drift(double sigma = 0.8, long n_steps = 1000,
                                  double delta = 0.001) {
    SdeConfig c;
    c.mu = Eigen::VectorXd::Constant(1, 0.5 * sigma * sigma);
    c.sigma = sigma;
    c.n_steps = n_steps;
    c.delta = delta;
    return c;
  }

  double horizon() const { return static_cast<double>(n_steps) * delta; }

  /// Drift broadcast to dimension d.
  Eigen::ArrayXd drift(Eigen::Index d) const;

  /// mu - sigma^2/2, the drift of log X, broadcast to d.
  Eigen::ArrayXd log_drift(Eigen::Index d) const {
    return drift(d) - 0.5 * sigma * sigma;
  }

  void validate() const;
};

/// Counters filled by the stepping routines.
struct StepDiagnostics {
  long clamped_entries = 0;
  long clamped_steps = 0;
};

namespace detail {
/// x o exp(exponent), honouring the overflow guard.
Eigen::ArrayXXd apply_exponent(const Eigen::ArrayXXd& x, Eigen::ArrayXXd exponent,
                               const SdeConfig& config, StepDiagnostics* diag, long step);
}

/// X_t = x0 o exp((mu - sigma^2/2) t + sigma sqrt(t) Z) with caller-supplied Z.
Eigen::ArrayXXd forward_closed_form(const Eigen::ArrayXXd& x0, double t, const SdeConfig& config,
                                    const Eigen::ArrayXXd& z);
Eigen::ArrayXXd forward_closed_form(const Eigen::ArrayXXd& x0, double t, const SdeConfig& config,
                                    Rng& rng);

/// One Euler-Maruyama step of the log-space forward process.
Eigen::ArrayXXd forward_step(const Eigen::ArrayXXd& xk, const SdeConfig& config,
                             const Eigen::ArrayXXd& z, StepDiagnostics* diag = nullptr);
Eigen::ArrayXXd forward_step(const Eigen::ArrayXXd& xk, const SdeConfig& config, Rng& rng,
                             StepDiagnostics* diag = nullptr);

/// Drift constant c in  -delta (mu - c sigma^2 1)  for the reverse step.
double reverse_drift_factor(DriftVariant variant);

/// x_{k-1} = x_k o exp(-delta (mu - c sigma^2) + delta sigma^2 x_k o score(x_k, k)
///                     + noise_scale sqrt(delta) sigma Z).
/// The score is queried at step index k of its own grid; config.delta is the
/// step actually taken, which may be smaller than the training grid.
Eigen::ArrayXXd reverse_step(const Eigen::ArrayXXd& xk, long k, const ScoreField& score,
                             const SdeConfig& config, const Eigen::ArrayXXd& z,
                             double noise_scale = 1.0, StepDiagnostics* diag = nullptr);
Eigen::ArrayXXd reverse_step(const Eigen::ArrayXXd& xk, long k, const ScoreField& score,
                             const SdeConfig& config, Rng& rng, double noise_scale = 1.0,
                             StepDiagnostics* diag = nullptr);

/// Score of Y = log X from the score of X:  1 + x o score_x.
template <typename DerivedX, typename DerivedS>
auto score_change_of_variables(const Eigen::ArrayBase<DerivedX>& x,
                               const Eigen::ArrayBase<DerivedS>& score_x) {
  using Plain = typename DerivedX::PlainObject;
  return Plain(typename DerivedX::Scalar(1) + x.derived() * score_x.derived());
}

/// x_{k-1} = x_k o exp(-eta x_k o grad + sqrt(eta) Z). With eta = delta sigma^2
/// and mu = 3 sigma^2 / 2 this is reverse_step with score = -grad.
template <typename DerivedX, typename DerivedG, typename DerivedZ>
auto egd_equivalent_step(const Eigen::ArrayBase<DerivedX>& xk, const Eigen::ArrayBase<DerivedG>& grad,
                         typename DerivedX::Scalar eta, const Eigen::ArrayBase<DerivedZ>& z) {
  using Plain = typename DerivedX::PlainObject;
  if (!(eta > 0)) throw DomainError("egd_equivalent_step: eta must be positive");
  return Plain(xk.derived() * (-eta * xk.derived() * grad.derived() + std::sqrt(eta) * z.derived()).exp());
}

/// Recorded forward path. states[i] is the batch at step steps[i].
struct Trajectory {
  std::vector<SampleBatch> states;
  std::vector<long> steps;
  SdeConfig config;
  std::uint64_t seed = 0;
};

/// Runs n_steps - 1 forward steps from x0 (k = 0 .. N-1), recording every
/// record_every-th step plus the last one. `observer` sees every state.
Trajectory simulate_forward(const Eigen::ArrayXXd& x0, const SdeConfig& config, std::uint64_t seed,
                            long record_every = 1,
                            const std::function<void(long, const Eigen::ArrayXXd&)>& observer = {});

}  // namespace gbm
