#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/errors.hpp"
#include "gbm/rng.hpp"
#include "gbm/score_field.hpp"

namespace gbm {

/// Layer widths of a ScoreNet. The network sees [log x ; time features]
/// where the time features are sin/cos of k/N at `time_frequencies`
/// geometrically spaced angular frequencies.
struct ScoreNetArchitecture {
  Eigen::Index input_dim = 1;
  int time_frequencies = 16;
  long n_steps = 1000;
  std::vector<Eigen::Index> hidden{64, 64};

  Eigen::Index embedding_width() const { return 2 * time_frequencies; }
  Eigen::Index feature_width() const { return input_dim + embedding_width(); }
  std::size_t layer_count() const { return hidden.size() + 1; }
  Eigen::Index layer_in(std::size_t l) const { return l == 0 ? feature_width() : hidden[l - 1]; }
  Eigen::Index layer_out(std::size_t l) const { return l == hidden.size() ? input_dim : hidden[l]; }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) n += layer_out(l) * (layer_in(l) + 1);
    return n;
  }

  void validate() const {
    if (input_dim < 1) throw StructuralError("ScoreNet: input_dim must be >= 1");
    if (time_frequencies < 0) throw StructuralError("ScoreNet: time_frequencies must be >= 0");
    if (n_steps < 1) throw StructuralError("ScoreNet: n_steps must be >= 1");
    for (auto w : hidden)
      if (w < 1) throw StructuralError("ScoreNet: hidden widths must be >= 1");
  }

  bool operator==(const ScoreNetArchitecture&) const = default;
};

/// Angular frequency of the j-th time feature: pi * 2^(j/2).
inline double time_frequency(int j) { return std::numbers::pi * std::exp2(0.5 * j); }

template <typename Scalar>
Scalar silu(Scalar z) {
  return z / (Scalar(1) + std::exp(-z));
}

template <typename Scalar>
Scalar silu_derivative(Scalar z) {
  const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-z));
  return s * (Scalar(1) + z * (Scalar(1) - s));
}

/// Feed-forward score model s(x, k). The last layer produces the scaled
/// score h = x o s(x, k) from log x, which is what the multiplicative losses
/// and samplers consume; forward() divides by x.
template <typename Scalar>
class ScoreNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using WeightMap = Eigen::Map<const Matrix>;
  using BiasMap = Eigen::Map<const Vector>;

  /// Activations kept by a forward pass for the matching backward pass.
  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activations of hidden layers
    Array x;
    std::uint64_t version = 0;
    bool filled = false;
  };

  explicit ScoreNet(ScoreNetArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    theta_ = Vector::Zero(arch_.parameter_count());
  }

  /// Scaled-normal weights (variance 1/fan_in), zero biases. The output
  /// layer is zero unless `output_scale` > 0, in which case it is drawn with
  /// that multiple of the usual scale.
  static ScoreNet initialized(ScoreNetArchitecture arch, Rng& rng, double output_scale = 0.0) {
    ScoreNet net(std::move(arch));
    Vector& th = net.theta_;
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < net.arch_.layer_count(); ++l) {
      const Eigen::Index in = net.arch_.layer_in(l), out = net.arch_.layer_out(l);
      const bool last = l + 1 == net.arch_.layer_count();
      const double scale = (last ? output_scale : 1.0) / std::sqrt(static_cast<double>(in));
      for (Eigen::Index i = 0; i < in * out; ++i)
        th(off + i) = scale == 0.0 ? Scalar(0) : static_cast<Scalar>(scale * rng.normal());
      off += in * out + out;
    }
    return net;
  }

  const ScoreNetArchitecture& architecture() const { return arch_; }
  Eigen::Index parameter_count() const { return theta_.size(); }
  const Vector& parameters() const { return theta_; }

  /// Mutable access invalidates every outstanding cache.
  Vector& parameters_mut() {
    ++version_;
    return theta_;
  }
  void set_parameters(const Vector& theta) {
    if (theta.size() != theta_.size()) throw StructuralError("ScoreNet: parameter vector size mismatch");
    ++version_;
    theta_ = theta;
  }
  std::uint64_t version() const { return version_; }

  WeightMap weight(std::size_t l) const {
    return WeightMap(theta_.data() + offset(l), arch_.layer_out(l), arch_.layer_in(l));
  }
  BiasMap bias(std::size_t l) const {
    return BiasMap(theta_.data() + offset(l) + arch_.layer_out(l) * arch_.layer_in(l),
                   arch_.layer_out(l));
  }

  /// Feature matrix [log x ; sin(w_j k/N) ; cos(w_j k/N)], one column per sample.
  Matrix features(const Array& x, const std::vector<long>& steps) const {
    check_input(x, steps);
    const Eigen::Index d = arch_.input_dim, n = x.cols();
    Matrix f(arch_.feature_width(), n);
    f.topRows(d) = x.log().matrix();
    for (Eigen::Index c = 0; c < n; ++c) {
      const double tau = static_cast<double>(steps[static_cast<std::size_t>(c)]) /
                         static_cast<double>(arch_.n_steps);
      for (int j = 0; j < arch_.time_frequencies; ++j) {
        const double a = time_frequency(j) * tau;
        f(d + 2 * j, c) = static_cast<Scalar>(std::sin(a));
        f(d + 2 * j + 1, c) = static_cast<Scalar>(std::cos(a));
      }
    }
    return f;
  }

  /// h = x o s(x, k) for each column; steps[c] is the step index of column c.
  Matrix forward_scaled(const Array& x, const std::vector<long>& steps, Cache* cache = nullptr) const {
    Matrix a = features(x, steps);
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
      cache->x = x;
    }
    const std::size_t layers = arch_.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix z = weight(l) * a;
      z.colwise() += bias(l);
      if (cache) cache->inputs.push_back(std::move(a));
      if (l + 1 == layers) {
        if (cache) {
          cache->version = version_;
          cache->filled = true;
        }
        return z;
      }
      a = z.unaryExpr([](Scalar v) { return silu(v); });
      if (cache) cache->pre.push_back(std::move(z));
    }
    return {};  // unreachable: layer_count() >= 1
  }

  Matrix forward_scaled(const Array& x, long k, Cache* cache = nullptr) const {
    return forward_scaled(x, std::vector<long>(static_cast<std::size_t>(x.cols()), k), cache);
  }

  /// s(x, k).
  Array forward(const Array& x, long k) const { return forward_scaled(x, k).array() / x; }
  Array forward(const Array& x, const std::vector<long>& steps) const {
    return forward_scaled(x, steps).array() / x;
  }

  /// Exact gradient of a scalar loss with respect to theta, given dL/dh for
  /// the cached forward pass.
  Vector backward(const Matrix& grad_scaled, const Cache& cache) const {
    if (!cache.filled) throw StructuralError("ScoreNet::backward: cache was never filled by forward");
    if (cache.version != version_)
      throw StructuralError("ScoreNet::backward: stale cache (parameters changed since forward)");
    if (grad_scaled.rows() != arch_.input_dim || grad_scaled.cols() != cache.x.cols())
      throw StructuralError("ScoreNet::backward: gradient shape does not match cached batch");

    Vector grad = Vector::Zero(theta_.size());
    Matrix g = grad_scaled;
    for (std::size_t l = arch_.layer_count(); l-- > 0;) {
      const Eigen::Index in = arch_.layer_in(l), out = arch_.layer_out(l);
      Eigen::Map<Matrix> dw(grad.data() + offset(l), out, in);
      Eigen::Map<Vector> db(grad.data() + offset(l) + out * in, out);
      dw.noalias() = g * cache.inputs[l].transpose();
      db = g.rowwise().sum();
      if (l > 0) {
        Matrix back = weight(l).transpose() * g;
        g = back.cwiseProduct(cache.pre[l - 1].unaryExpr([](Scalar v) { return silu_derivative(v); }));
      }
    }
    return grad;
  }

  /// Same as backward() but for dL/ds, the gradient against the unscaled score.
  Vector backward_from_score_grad(const Matrix& grad_score, const Cache& cache) const {
    if (grad_score.rows() != cache.x.rows() || grad_score.cols() != cache.x.cols())
      throw StructuralError("ScoreNet::backward: gradient shape does not match cached batch");
    return backward((grad_score.array() / cache.x).matrix(), cache);
  }

 private:
  Eigen::Index offset(std::size_t layer) const {
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += arch_.layer_out(l) * (arch_.layer_in(l) + 1);
    return off;
  }

  void check_input(const Array& x, const std::vector<long>& steps) const {
    if (x.rows() != arch_.input_dim)
      throw StructuralError("ScoreNet: input has " + std::to_string(x.rows()) +
                            " rows, network expects " + std::to_string(arch_.input_dim));
    if (static_cast<Eigen::Index>(steps.size()) != x.cols())
      throw StructuralError("ScoreNet: one step index per column required");
    if (!(x > Scalar(0)).all()) throw DomainError("ScoreNet: inputs must be strictly positive");
  }

  ScoreNetArchitecture arch_;
  Vector theta_;
  std::uint64_t version_ = 0;
};

/// ScoreField view of a (frozen) double-precision network. The network must
/// outlive the field.
class NetworkScore final : public ScoreField {
 public:
  explicit NetworkScore(const ScoreNet<double>& net) : net_(&net) {}
  Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long k) const override {
    return net_->forward(x, k);
  }
  Eigen::ArrayXXd scaled(const Eigen::ArrayXXd& x, long k) const override {
    return net_->forward_scaled(x, k).array();
  }
  ScoreKind kind() const override { return ScoreKind::network; }

 private:
  const ScoreNet<double>* net_;
};

}  // namespace gbm
