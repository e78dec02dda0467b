#include "gbm/optim.hpp"

namespace gbm {

namespace {

void check(const EgdState& s, const Eigen::VectorXd& grad, const char* what) {
  if (grad.size() != s.x.size()) throw StructuralError(std::string(what) + ": gradient size mismatch");
  if ((s.x.array() == 0.0).any())
    throw DomainError(std::string(what) + ": degenerate parameter (zero entry)");
}

EgdState finish(const EgdState& prev, Eigen::VectorXd next, const char* what) {
  if ((next.array() == 0.0).any())
    throw DomainError(std::string(what) + ": parameter underflowed to zero (degenerate)");
  if (!next.allFinite()) throw NumericError(std::string(what) + ": non-finite parameter", prev.step);
  EgdState out = prev;
  out.sign_flips += ((next.array().sign() != prev.sign)).count();
  out.x = std::move(next);
  ++out.step;
  return out;
}

}  // namespace

EgdState EgdState::create(Eigen::VectorXd x0, double eta) {
  if (!(eta > 0.0)) throw DomainError("EgdState: eta must be positive");
  if ((x0.array() == 0.0).any() || !x0.allFinite())
    throw DomainError("EgdState: entries must be nonzero and finite (degenerate parameter)");
  EgdState s;
  s.sign = x0.array().sign();
  s.x = std::move(x0);
  s.eta = eta;
  return s;
}

EgdState egd_step(const EgdState& state, const Eigen::VectorXd& grad) {
  check(state, grad, "egd_step");
  Eigen::VectorXd next = (state.x.array() * (-state.eta * grad.array() * state.sign).exp()).matrix();
  return finish(state, std::move(next), "egd_step");
}

EgdState modified_egd_step(const EgdState& state, const Eigen::VectorXd& grad) {
  check(state, grad, "modified_egd_step");
  Eigen::VectorXd next =
      (state.x.array() * (-state.eta * state.x.array() * grad.array()).exp()).matrix();
  return finish(state, std::move(next), "modified_egd_step");
}

EgdState gradient_descent_step(const EgdState& state, const Eigen::VectorXd& grad) {
  if (grad.size() != state.x.size()) throw StructuralError("gradient_descent_step: gradient size mismatch");
  EgdState out = state;
  out.x = state.x - state.eta * grad;
  // An entry landing exactly on zero counts as a flip.
  out.sign_flips += (out.x.array().sign() != state.x.array().sign()).count();
  ++out.step;
  return out;
}

}  // namespace gbm
