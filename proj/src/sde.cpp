#include "gbm/sde.hpp"

#include <string>

#include "gbm/log.hpp"

namespace gbm {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::analytic_lognormal: return "analytic-lognormal";
    case ScoreKind::analytic_mixture: return "analytic-mixture";
    case ScoreKind::network: return "network";
    case ScoreKind::conditional_target: return "conditional-target";
  }
  return "unknown";
}

Eigen::ArrayXd SdeConfig::drift(Eigen::Index d) const {
  if (mu.size() == 1) return Eigen::ArrayXd::Constant(d, mu(0));
  if (mu.size() != d)
    throw StructuralError("SdeConfig: drift has " + std::to_string(mu.size()) +
                          " entries, state has " + std::to_string(d));
  return mu.array();
}

void SdeConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("SdeConfig: sigma must be > 0");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("SdeConfig: delta must be > 0");
  if (n_steps < 1) throw DomainError("SdeConfig: n_steps must be >= 1");
  if (mu.size() < 1 || !mu.allFinite()) throw DomainError("SdeConfig: drift must be finite");
  if (!(exponent_limit > 0.0)) throw DomainError("SdeConfig: exponent_limit must be > 0");
}

namespace detail {

Eigen::ArrayXXd apply_exponent(const Eigen::ArrayXXd& x, Eigen::ArrayXXd exponent,
                               const SdeConfig& config, StepDiagnostics* diag, long step) {
  if (config.clamp_exponent) {
    const double lim = config.exponent_limit;
    const long over = (exponent.abs() > lim).count();
    if (over > 0) {
      exponent = exponent.max(-lim).min(lim);
      if (diag) {
        diag->clamped_entries += over;
        diag->clamped_steps += 1;
      }
      log_warning("step " + std::to_string(step) + ": clamped " + std::to_string(over) +
                  " exponent entries to +/-" + std::to_string(lim));
    }
  }
  return x * exponent.exp();
}

}  // namespace detail

namespace {

void check_noise_shape(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& z, const char* what) {
  if (x.rows() != z.rows() || x.cols() != z.cols())
    throw StructuralError(std::string(what) + ": noise shape does not match state shape");
}

}  // namespace

Eigen::ArrayXXd forward_closed_form(const Eigen::ArrayXXd& x0, double t, const SdeConfig& config,
                                    const Eigen::ArrayXXd& z) {
  config.validate();
  require_positive(x0, "forward_closed_form");
  check_noise_shape(x0, z, "forward_closed_form");
  const double eps = 1e-12 * std::max(1.0, config.horizon());
  if (t < 0.0 || t > config.horizon() + eps)
    throw DomainError("forward_closed_form: t must lie in [0, T]");
  const Eigen::ArrayXd drift = config.log_drift(x0.rows()) * t;
  const Eigen::ArrayXXd exponent = (config.sigma * std::sqrt(t) * z).colwise() + drift;
  return x0 * exponent.exp();
}

Eigen::ArrayXXd forward_closed_form(const Eigen::ArrayXXd& x0, double t, const SdeConfig& config,
                                    Rng& rng) {
  return forward_closed_form(x0, t, config, rng.normal_array(x0.rows(), x0.cols()));
}

Eigen::ArrayXXd forward_step(const Eigen::ArrayXXd& xk, const SdeConfig& config,
                             const Eigen::ArrayXXd& z, StepDiagnostics* diag) {
  config.validate();
  require_positive(xk, "forward_step");
  check_noise_shape(xk, z, "forward_step");
  const Eigen::ArrayXd drift = config.log_drift(xk.rows()) * config.delta;
  Eigen::ArrayXXd exponent = (std::sqrt(config.delta) * config.sigma * z).colwise() + drift;
  return detail::apply_exponent(xk, std::move(exponent), config, diag, -1);
}

Eigen::ArrayXXd forward_step(const Eigen::ArrayXXd& xk, const SdeConfig& config, Rng& rng,
                             StepDiagnostics* diag) {
  return forward_step(xk, config, rng.normal_array(xk.rows(), xk.cols()), diag);
}

double reverse_drift_factor(DriftVariant variant) {
  return variant == DriftVariant::derived ? 1.5 : 0.5;
}

Eigen::ArrayXXd reverse_step(const Eigen::ArrayXXd& xk, long k, const ScoreField& score,
                             const SdeConfig& config, const Eigen::ArrayXXd& z, double noise_scale,
                             StepDiagnostics* diag) {
  config.validate();
  require_positive(xk, "reverse_step");
  check_noise_shape(xk, z, "reverse_step");
  const Eigen::ArrayXXd xs = score.scaled(xk, k);
  if (xs.rows() != xk.rows() || xs.cols() != xk.cols())
    throw StructuralError("reverse_step: score shape does not match state shape");
  if (!xs.allFinite())
    throw NumericError("reverse_step: score is not finite at step " + std::to_string(k), k);

  const double s2 = config.sigma * config.sigma;
  const Eigen::ArrayXd drift =
      -config.delta * (config.drift(xk.rows()) - reverse_drift_factor(config.drift_variant) * s2);
  Eigen::ArrayXXd exponent =
      (config.delta * s2 * xs + noise_scale * std::sqrt(config.delta) * config.sigma * z).colwise() +
      drift;
  return detail::apply_exponent(xk, std::move(exponent), config, diag, k);
}

Eigen::ArrayXXd reverse_step(const Eigen::ArrayXXd& xk, long k, const ScoreField& score,
                             const SdeConfig& config, Rng& rng, double noise_scale,
                             StepDiagnostics* diag) {
  return reverse_step(xk, k, score, config, rng.normal_array(xk.rows(), xk.cols()), noise_scale,
                      diag);
}

Trajectory simulate_forward(const Eigen::ArrayXXd& x0, const SdeConfig& config, std::uint64_t seed,
                            long record_every,
                            const std::function<void(long, const Eigen::ArrayXXd&)>& observer) {
  config.validate();
  require_positive(x0, "simulate_forward");
  if (record_every < 1) throw DomainError("simulate_forward: record_every must be >= 1");
  Trajectory traj;
  traj.config = config;
  traj.seed = seed;
  Rng rng(seed);
  Eigen::ArrayXXd x = x0;
  const long last = config.n_steps - 1;
  auto record = [&](long k) {
    traj.states.push_back(SampleBatch{x, k, seed});
    traj.steps.push_back(k);
  };
  record(0);
  if (observer) observer(0, x);
  for (long k = 1; k <= last; ++k) {
    x = forward_step(x, config, rng);
    if (observer) observer(k, x);
    if (k % record_every == 0 || k == last) record(k);
  }
  return traj;
}

}  // namespace gbm
