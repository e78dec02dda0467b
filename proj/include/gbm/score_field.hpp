#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace gbm {

enum class ScoreKind { analytic_lognormal, analytic_mixture, network, conditional_target };

std::string_view to_string(ScoreKind kind);

/// Evaluable map (x, k) -> score, batched over columns of x (d x n).
/// k is a step index on the field's own time grid (t = k * delta).
/// Implementations are immutable after construction and safe to call
/// concurrently.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long k) const = 0;
  virtual ScoreKind kind() const = 0;

  /// x o score(x, k). Fields that natively produce the scaled form override this.
  virtual Eigen::ArrayXXd scaled(const Eigen::ArrayXXd& x, long k) const {
    return x * (*this)(x, k);
  }
};

}  // namespace gbm
