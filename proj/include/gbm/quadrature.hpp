#pragma once

#include <functional>

#include <Eigen/Dense>

namespace gbm {

/// Gauss-Hermite rule for expectations under N(0, 1):
///   E[f(Z)] ~= sum_i weights(i) f(nodes(i)).
/// Built with the Golub-Welsch eigenvalue method; weights sum to one.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GaussHermiteRule gauss_hermite(int order);

/// Tensor-product rule in `dim` dimensions: nodes is dim x order^dim.
struct TensorRule {
  Eigen::ArrayXXd nodes;
  Eigen::ArrayXd weights;
};

TensorRule gauss_hermite_tensor(int order, int dim);

}  // namespace gbm
