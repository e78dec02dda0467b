#include "gbm/quadrature.hpp"

#include <cmath>

#include "gbm/errors.hpp"

namespace gbm {

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw DomainError("gauss_hermite: order must be >= 1");
  // Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    jacobi(i, i - 1) = std::sqrt(static_cast<double>(i));
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square().matrix();
  rule.weights /= rule.weights.sum();
  return rule;
}

TensorRule gauss_hermite_tensor(int order, int dim) {
  if (dim < 1) throw DomainError("gauss_hermite_tensor: dim must be >= 1");
  const GaussHermiteRule base = gauss_hermite(order);
  Eigen::Index count = 1;
  for (int i = 0; i < dim; ++i) count *= order;
  TensorRule rule{Eigen::ArrayXXd(dim, count), Eigen::ArrayXd::Ones(count)};
  for (Eigen::Index c = 0; c < count; ++c) {
    Eigen::Index rem = c;
    for (int i = 0; i < dim; ++i) {
      const Eigen::Index idx = rem % order;
      rem /= order;
      rule.nodes(i, c) = base.nodes(idx);
      rule.weights(c) *= base.weights(idx);
    }
  }
  return rule;
}

}  // namespace gbm
