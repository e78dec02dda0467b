#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/score_field.hpp"
#include "gbm/sde.hpp"

namespace gbm {

/// Score of LN(m, s^2 I) at every column of x:  -(1/x)(1 + (log x - m)/s^2).
template <typename Derived>
typename Derived::PlainObject analytic_lognormal_score(const Eigen::ArrayBase<Derived>& x,
                                                       const Eigen::VectorXd& m, double s) {
  using Scalar = typename Derived::Scalar;
  require_positive_sigma(s);
  const auto mm = m.array().template cast<Scalar>();
  const Scalar inv_s2 = Scalar(1.0 / (s * s));
  typename Derived::PlainObject centred = x.derived().log();
  if (mm.size() == 1) {
    centred -= mm(0);
  } else {
    if (mm.size() != x.rows()) throw StructuralError("analytic_lognormal_score: location size mismatch");
    centred.colwise() -= mm;
  }
  return -(Scalar(1) + centred * inv_s2) / x.derived();
}

/// Law of X_t when X_0 ~ LN(m, s^2 I):  LN(m + (mu - sigma^2/2) t, (s^2 + sigma^2 t) I).
LogNormalParams marginal_params(const LogNormalParams& data, double t, const SdeConfig& config);

Eigen::ArrayXXd marginal_score_for_lognormal_data(const Eigen::ArrayXXd& x, double t,
                                                  const LogNormalParams& data,
                                                  const SdeConfig& config);

struct MixtureComponent {
  double weight = 1.0;
  LogNormalParams params;
};

/// Throws DomainError for an empty list, nonpositive weights, or weights not
/// summing to one.
void validate_mixture(const std::vector<MixtureComponent>& components);

/// log p_t(x) per column for the forward-diffused mixture.
Eigen::ArrayXd mixture_log_density(const Eigen::ArrayXXd& x, double t,
                                   const std::vector<MixtureComponent>& components,
                                   const SdeConfig& config);

/// grad log p_t(x) for the forward-diffused mixture; responsibilities are
/// formed with log-sum-exp.
Eigen::ArrayXXd mixture_score(const Eigen::ArrayXXd& x, double t,
                              const std::vector<MixtureComponent>& components,
                              const SdeConfig& config);

/// x_t o grad log p(x_t | x_0) at step k:
///   -(1 + (log x_t - log x_0 - k delta (mu - sigma^2/2)) / (sigma^2 k delta)).
/// k == 0 is singular (zero conditional variance) and throws DomainError.
Eigen::ArrayXXd conditional_score_target(const Eigen::ArrayXXd& xt, const Eigen::ArrayXXd& x0,
                                         long k, const SdeConfig& config);

/// Column-wise variant: steps[c] is the step index of column c.
Eigen::ArrayXXd conditional_score_target(const Eigen::ArrayXXd& xt, const Eigen::ArrayXXd& x0,
                                         const std::vector<long>& steps, const SdeConfig& config);

/// Exact marginal score of forward-diffused log-normal (mixture) data.
/// Step index k maps to t = k * config.delta.
class LogNormalMixtureScore final : public ScoreField {
 public:
  LogNormalMixtureScore(std::vector<MixtureComponent> components, SdeConfig config);
  LogNormalMixtureScore(const LogNormalParams& data, SdeConfig config)
      : LogNormalMixtureScore(std::vector<MixtureComponent>{{1.0, data}}, std::move(config)) {}

  Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long k) const override;
  Eigen::ArrayXXd at_time(const Eigen::ArrayXXd& x, double t) const;
  ScoreKind kind() const override {
    return components_.size() == 1 ? ScoreKind::analytic_lognormal : ScoreKind::analytic_mixture;
  }

  const std::vector<MixtureComponent>& components() const { return components_; }
  const SdeConfig& config() const { return config_; }
  Eigen::Index dim() const { return components_.front().params.dim(); }

  /// Mixture components of the marginal law at step k.
  std::vector<MixtureComponent> marginal_components(long k) const;

 private:
  std::vector<MixtureComponent> components_;
  SdeConfig config_;
};

/// Conditional score around a fixed clean batch x0 (one column per state).
class ConditionalTargetScore final : public ScoreField {
 public:
  ConditionalTargetScore(Eigen::ArrayXXd x0, SdeConfig config)
      : x0_(std::move(x0)), config_(std::move(config)) {}
  Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long k) const override {
    return scaled(x, k) / x;
  }
  Eigen::ArrayXXd scaled(const Eigen::ArrayXXd& x, long k) const override {
    return conditional_score_target(x, x0_, k, config_);
  }
  ScoreKind kind() const override { return ScoreKind::conditional_target; }

 private:
  Eigen::ArrayXXd x0_;
  SdeConfig config_;
};

}  // namespace gbm
