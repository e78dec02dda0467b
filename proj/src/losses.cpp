#include "gbm/losses.hpp"

#include <map>
#include <string>

#include "gbm/quadrature.hpp"

namespace gbm {

namespace {

Eigen::ArrayXXd noise_to_steps(const Eigen::ArrayXXd& x0, const std::vector<long>& steps,
                               const SdeConfig& config, Rng& rng) {
  const Eigen::ArrayXd log_drift = config.log_drift(x0.rows());
  const Eigen::ArrayXXd z = rng.normal_array(x0.rows(), x0.cols());
  Eigen::ArrayXXd xt(x0.rows(), x0.cols());
  for (Eigen::Index c = 0; c < x0.cols(); ++c) {
    const double t = static_cast<double>(steps[static_cast<std::size_t>(c)]) * config.delta;
    xt.col(c) = x0.col(c) * (t * log_drift + config.sigma * std::sqrt(t) * z.col(c)).exp();
  }
  return xt;
}

struct Terms {
  double loss = 0, target = 0, quad = 0, cross = 0;
};

/// Accumulates weighted terms for target/prediction columns and returns dL/dh.
Eigen::MatrixXd accumulate(const Eigen::ArrayXXd& target, const Eigen::ArrayXXd& h,
                           const std::vector<long>& steps, const MdsmOptions& options, Terms& terms) {
  const auto n = static_cast<double>(target.cols());
  Eigen::MatrixXd grad(target.rows(), target.cols());
  for (Eigen::Index c = 0; c < target.cols(); ++c) {
    const double w = options.weight ? options.weight(steps[static_cast<std::size_t>(c)]) : 1.0;
    const Eigen::ArrayXd diff = h.col(c) - target.col(c);
    terms.loss += w * 0.5 * diff.square().sum();
    terms.target += 0.5 * target.col(c).square().sum();
    terms.quad += 0.5 * h.col(c).square().sum();
    terms.cross += (target.col(c) * h.col(c)).sum();
    grad.col(c) = (w / n) * diff.matrix();
  }
  terms.loss /= n;
  terms.target /= n;
  terms.quad /= n;
  terms.cross /= n;
  return grad;
}

Eigen::ArrayXXd clipped_target(const TrainingBatch& batch, const SdeConfig& config,
                               const MdsmOptions& options, long& clip_count) {
  Eigen::ArrayXXd target = conditional_score_target(batch.xt, batch.x0, batch.steps, config);
  clip_count = 0;
  if (options.target_clip > 0.0) {
    const double lim = options.target_clip;
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      if ((target.col(c).abs() > lim).any()) {
        ++clip_count;
        target.col(c) = target.col(c).max(-lim).min(lim);
      }
    }
  }
  return target;
}

void check_batch(const TrainingBatch& batch) {
  if (batch.x0.cols() < 1) throw DomainError("mdsm_loss: empty batch");
  if (batch.x0.rows() != batch.xt.rows() || batch.x0.cols() != batch.xt.cols() ||
      static_cast<Eigen::Index>(batch.steps.size()) != batch.x0.cols())
    throw StructuralError("mdsm_loss: inconsistent batch shapes");
}

LossReport make_report(const Terms& t, const TrainingBatch& batch, long clips) {
  LossReport r;
  r.loss = t.loss;
  r.target_term = t.target;
  r.quadratic_term = t.quad;
  r.cross_term = t.cross;
  r.batch_size = static_cast<long>(batch.x0.cols());
  r.steps = batch.steps;
  r.clip_count = clips;
  return r;
}

void check_quadrature_dim(Eigen::Index d) {
  if (d < 1 || d > 2)
    throw CapabilityError("quadrature losses support d = 1 or 2, got d = " + std::to_string(d));
}

}  // namespace

TrainingBatch make_training_batch(const Eigen::ArrayXXd& x0, const SdeConfig& config, Rng& rng) {
  config.validate();
  require_positive(x0, "make_training_batch");
  if (config.n_steps < 2) throw DomainError("make_training_batch: need n_steps >= 2");
  std::vector<long> steps(static_cast<std::size_t>(x0.cols()));
  for (auto& k : steps) k = rng.uniform_int(1, config.n_steps - 1);
  Eigen::ArrayXXd xt = noise_to_steps(x0, steps, config, rng);
  return {x0, std::move(xt), std::move(steps)};
}

TrainingBatch make_training_batch(const Eigen::ArrayXXd& x0, long k, const SdeConfig& config, Rng& rng) {
  config.validate();
  require_positive(x0, "make_training_batch");
  if (k < 1) throw DomainError("make_training_batch: step must be >= 1");
  std::vector<long> steps(static_cast<std::size_t>(x0.cols()), k);
  Eigen::ArrayXXd xt = noise_to_steps(x0, steps, config, rng);
  return {x0, std::move(xt), std::move(steps)};
}

LossReport mdsm_loss(const ScoreNet<double>& net, const TrainingBatch& batch, const SdeConfig& config,
                     const MdsmOptions& options, ScoreNet<double>::Cache* cache) {
  check_batch(batch);
  long clips = 0;
  const Eigen::ArrayXXd target = clipped_target(batch, config, options, clips);
  const Eigen::ArrayXXd h = net.forward_scaled(batch.xt, batch.steps, cache).array();
  Terms terms;
  Eigen::MatrixXd grad = accumulate(target, h, batch.steps, options, terms);
  LossReport r = make_report(terms, batch, clips);
  r.output_grad = std::move(grad);
  return r;
}

LossReport mdsm_loss(const ScoreField& model, const TrainingBatch& batch, const SdeConfig& config,
                     const MdsmOptions& options) {
  check_batch(batch);
  long clips = 0;
  const Eigen::ArrayXXd target = clipped_target(batch, config, options, clips);

  std::map<long, std::vector<Eigen::Index>> by_step;
  for (Eigen::Index c = 0; c < batch.xt.cols(); ++c)
    by_step[batch.steps[static_cast<std::size_t>(c)]].push_back(c);
  Eigen::ArrayXXd h(batch.xt.rows(), batch.xt.cols());
  for (const auto& [k, cols] : by_step) {
    Eigen::ArrayXXd xs(batch.xt.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) xs.col(static_cast<Eigen::Index>(i)) = batch.xt.col(cols[i]);
    const Eigen::ArrayXXd hs = model.scaled(xs, k);
    for (std::size_t i = 0; i < cols.size(); ++i) h.col(cols[i]) = hs.col(static_cast<Eigen::Index>(i));
  }
  Terms terms;
  accumulate(target, h, batch.steps, options, terms);
  return make_report(terms, batch, clips);
}

double mesm_loss(const ScoreField& model, const LogNormalMixtureScore& truth, long k,
                 const QuadratureSpec& quad) {
  const Eigen::Index d = truth.dim();
  check_quadrature_dim(d);
  if (k < 0) throw DomainError("mesm_loss: step must be >= 0");
  const TensorRule rule = gauss_hermite_tensor(quad.order, static_cast<int>(d));
  const double t = static_cast<double>(k) * truth.config().delta;
  double total = 0.0;
  for (const auto& comp : truth.marginal_components(k)) {
    const Eigen::ArrayXXd x = ((comp.params.sigma * rule.nodes).colwise() + comp.params.mu.array()).exp();
    const Eigen::ArrayXXd diff = x * truth.at_time(x, t) - model.scaled(x, k);
    total += comp.weight * (rule.weights * (0.5 * diff.square().colwise().sum().transpose())).sum();
  }
  return total;
}

LossReport mdsm_quadrature(const ScoreField& model, const LogNormalMixtureScore& truth, long k,
                           const QuadratureSpec& quad) {
  const Eigen::Index d = truth.dim();
  check_quadrature_dim(d);
  if (k < 1) throw DomainError("mdsm_quadrature: singular time at step " + std::to_string(k));
  const SdeConfig& config = truth.config();
  const double t = static_cast<double>(k) * config.delta;
  const double noise_sd = config.sigma * std::sqrt(t);
  const Eigen::ArrayXd shift = config.log_drift(d) * t;
  const TensorRule rule = gauss_hermite_tensor(quad.order, static_cast<int>(2 * d));

  LossReport r;
  for (const auto& comp : truth.components()) {
    const Eigen::ArrayXXd z0 = rule.nodes.topRows(d);
    const Eigen::ArrayXXd eps = rule.nodes.bottomRows(d);
    const Eigen::ArrayXXd y0 = (comp.params.sigma * z0).colwise() + comp.params.mu.array();
    const Eigen::ArrayXXd yt = (y0 + noise_sd * eps).colwise() + shift;
    const Eigen::ArrayXXd target = -(1.0 + eps / noise_sd);
    const Eigen::ArrayXXd h = model.scaled(yt.exp(), k);
    const double w = comp.weight;
    r.loss += w * (rule.weights * (0.5 * (target - h).square().colwise().sum().transpose())).sum();
    r.target_term += w * (rule.weights * (0.5 * target.square().colwise().sum().transpose())).sum();
    r.quadratic_term += w * (rule.weights * (0.5 * h.square().colwise().sum().transpose())).sum();
    r.cross_term += w * (rule.weights * (target * h).colwise().sum().transpose()).sum();
  }
  r.steps = {k};
  return r;
}

double hyvarinen_nn_loss(const ScoreField& model, const LogNormalMixtureScore& truth,
                         const QuadratureSpec& quad) {
  return mesm_loss(model, truth, 0, quad);
}

}  // namespace gbm
