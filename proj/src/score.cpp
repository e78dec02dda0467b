#include "gbm/score.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace gbm {

LogNormalParams marginal_params(const LogNormalParams& data, double t, const SdeConfig& config) {
  require_positive_sigma(data.sigma);
  if (t < 0.0) throw DomainError("marginal_params: t must be >= 0");
  LogNormalParams out;
  out.mu = data.mu + (config.log_drift(data.dim()) * t).matrix();
  out.sigma = std::sqrt(data.sigma * data.sigma + config.sigma * config.sigma * t);
  return out;
}

Eigen::ArrayXXd marginal_score_for_lognormal_data(const Eigen::ArrayXXd& x, double t,
                                                  const LogNormalParams& data,
                                                  const SdeConfig& config) {
  require_positive(x, "marginal_score_for_lognormal_data");
  const LogNormalParams p = marginal_params(data, t, config);
  return analytic_lognormal_score(x, p.mu, p.sigma);
}

void validate_mixture(const std::vector<MixtureComponent>& components) {
  if (components.empty()) throw DomainError("mixture: component list is empty");
  double total = 0.0;
  const Eigen::Index d = components.front().params.dim();
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw DomainError("mixture: weights must be positive");
    if (c.params.dim() != d) throw StructuralError("mixture: components differ in dimension");
    require_positive_sigma(c.params.sigma);
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("mixture: weights sum to " + std::to_string(total) + ", expected 1");
}

namespace {

/// Per-column log density of each diffused component (components x n), weight included.
Eigen::ArrayXXd weighted_component_log_densities(const Eigen::ArrayXXd& x, double t,
                                                 const std::vector<MixtureComponent>& components,
                                                 const SdeConfig& config) {
  const Eigen::ArrayXXd logx = x.log();
  const double d = static_cast<double>(x.rows());
  Eigen::ArrayXXd out(static_cast<Eigen::Index>(components.size()), x.cols());
  for (std::size_t j = 0; j < components.size(); ++j) {
    const LogNormalParams p = marginal_params(components[j].params, t, config);
    const Eigen::ArrayXXd z = (logx.colwise() - p.mu.array()) / p.sigma;
    out.row(static_cast<Eigen::Index>(j)) =
        std::log(components[j].weight) - 0.5 * z.square().colwise().sum() -
        logx.colwise().sum() - d * std::log(p.sigma) -
        0.5 * d * std::log(2.0 * std::numbers::pi);
  }
  return out;
}

Eigen::ArrayXd log_sum_exp_cols(const Eigen::ArrayXXd& a) {
  const Eigen::ArrayXd mx = a.colwise().maxCoeff().transpose();
  const Eigen::ArrayXd s = (a.rowwise() - mx.transpose()).exp().colwise().sum().transpose();
  return mx + s.log();
}

}  // namespace

Eigen::ArrayXd mixture_log_density(const Eigen::ArrayXXd& x, double t,
                                   const std::vector<MixtureComponent>& components,
                                   const SdeConfig& config) {
  validate_mixture(components);
  require_positive(x, "mixture_log_density");
  return log_sum_exp_cols(weighted_component_log_densities(x, t, components, config));
}

Eigen::ArrayXXd mixture_score(const Eigen::ArrayXXd& x, double t,
                              const std::vector<MixtureComponent>& components,
                              const SdeConfig& config) {
  validate_mixture(components);
  require_positive(x, "mixture_score");
  if (components.size() == 1) return marginal_score_for_lognormal_data(x, t, components[0].params, config);

  const Eigen::ArrayXXd logw = weighted_component_log_densities(x, t, components, config);
  const Eigen::ArrayXd lse = log_sum_exp_cols(logw);
  Eigen::ArrayXXd score = Eigen::ArrayXXd::Zero(x.rows(), x.cols());
  for (std::size_t j = 0; j < components.size(); ++j) {
    const Eigen::ArrayXd resp = (logw.row(static_cast<Eigen::Index>(j)).transpose() - lse).exp();
    const LogNormalParams p = marginal_params(components[j].params, t, config);
    score += analytic_lognormal_score(x, p.mu, p.sigma).rowwise() * resp.transpose();
  }
  return score;
}

Eigen::ArrayXXd conditional_score_target(const Eigen::ArrayXXd& xt, const Eigen::ArrayXXd& x0,
                                         const std::vector<long>& steps, const SdeConfig& config) {
  if (xt.rows() != x0.rows() || xt.cols() != x0.cols())
    throw StructuralError("conditional_score_target: x_t and x_0 shapes differ");
  if (static_cast<Eigen::Index>(steps.size()) != xt.cols())
    throw StructuralError("conditional_score_target: one step index per column required");
  require_positive(xt, "conditional_score_target");
  require_positive(x0, "conditional_score_target");
  const Eigen::ArrayXd log_drift = config.log_drift(xt.rows());
  const double s2 = config.sigma * config.sigma;
  Eigen::ArrayXXd out(xt.rows(), xt.cols());
  for (Eigen::Index c = 0; c < xt.cols(); ++c) {
    const long k = steps[static_cast<std::size_t>(c)];
    if (k <= 0)
      throw DomainError("conditional_score_target: singular time at step " + std::to_string(k) +
                        " (conditional variance is zero)");
    const double tk = static_cast<double>(k) * config.delta;
    out.col(c) = -(1.0 + (xt.col(c).log() - x0.col(c).log() - tk * log_drift) / (s2 * tk));
  }
  return out;
}

Eigen::ArrayXXd conditional_score_target(const Eigen::ArrayXXd& xt, const Eigen::ArrayXXd& x0,
                                         long k, const SdeConfig& config) {
  return conditional_score_target(xt, x0, std::vector<long>(static_cast<std::size_t>(xt.cols()), k),
                                  config);
}

LogNormalMixtureScore::LogNormalMixtureScore(std::vector<MixtureComponent> components,
                                             SdeConfig config)
    : components_(std::move(components)), config_(std::move(config)) {
  validate_mixture(components_);
  config_.validate();
}

Eigen::ArrayXXd LogNormalMixtureScore::at_time(const Eigen::ArrayXXd& x, double t) const {
  if (x.rows() != dim()) throw StructuralError("LogNormalMixtureScore: dimension mismatch");
  return mixture_score(x, t, components_, config_);
}

Eigen::ArrayXXd LogNormalMixtureScore::operator()(const Eigen::ArrayXXd& x, long k) const {
  return at_time(x, static_cast<double>(k) * config_.delta);
}

std::vector<MixtureComponent> LogNormalMixtureScore::marginal_components(long k) const {
  std::vector<MixtureComponent> out;
  const double t = static_cast<double>(k) * config_.delta;
  for (const auto& c : components_) out.push_back({c.weight, marginal_params(c.params, t, config_)});
  return out;
}

}  // namespace gbm
