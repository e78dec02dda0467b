#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "gbm/errors.hpp"

namespace gbm {

/// Parameters updated multiplicatively. The sign mask is frozen at
/// construction; every update keeps sign(x) equal to it.
struct EgdState {
  Eigen::VectorXd x;
  Eigen::ArrayXd sign;  ///< +1 / -1 per entry, fixed at construction
  double eta = 0.01;
  long step = 0;
  long sign_flips = 0;  ///< diagnostic; stays zero

  /// Throws DomainError if any entry of x0 is zero or non-finite.
  static EgdState create(Eigen::VectorXd x0, double eta);
};

/// X <- X o exp(-eta grad o sign(X)).
EgdState egd_step(const EgdState& state, const Eigen::VectorXd& grad);

/// X <- X o exp(-eta X o grad).
EgdState modified_egd_step(const EgdState& state, const Eigen::VectorXd& grad);

/// Additive baseline X <- X - eta grad. sign_flips counts entries whose sign
/// differs from the previous iterate.
EgdState gradient_descent_step(const EgdState& state, const Eigen::VectorXd& grad);

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
};

/// Adaptive-moment step with bias correction and decoupled weight decay.
/// `lr_scale` multiplies the learning rate (schedules).
template <typename Derived>
void adamw_step(Eigen::MatrixBase<Derived>& params, const Eigen::VectorXd& grads, AdamWState& state,
                const AdamWOptions& opt, double lr_scale = 1.0) {
  if (params.size() != grads.size()) throw StructuralError("adamw_step: parameter/gradient size mismatch");
  if (state.m.size() != grads.size()) {
    state.m = Eigen::VectorXd::Zero(grads.size());
    state.v = Eigen::VectorXd::Zero(grads.size());
    state.t = 0;
  }
  ++state.t;
  state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grads;
  state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  const double lr = opt.lr * lr_scale;
  using Scalar = typename Derived::Scalar;
  auto& p = params.derived();
  p *= static_cast<Scalar>(1.0 - lr * opt.weight_decay);
  const Eigen::VectorXd update =
      ((state.m / bc1).array() / ((state.v / bc2).array().sqrt() + opt.eps)).matrix();
  p -= (lr * update).template cast<Scalar>();
}

}  // namespace gbm
