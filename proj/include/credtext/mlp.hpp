#pragma once

// Dense feed-forward scorer: rectifier hidden layers, one logistic output.
// Samples travel as columns internally; callers pass one sample per row.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace credtext {

template <typename Scalar>
struct DenseLayer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;  // out x in
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;                  // out

  Eigen::Index inputs() const noexcept { return weights.cols(); }
  Eigen::Index outputs() const noexcept { return weights.rows(); }
};

template <typename Scalar>
Scalar logistic(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

/// ln(1 + e^z) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (z > Scalar(0) ? z : Scalar(0)) + log1p(exp(-abs(z)));
}

template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  std::vector<DenseLayer<Scalar>> layers;
  std::vector<std::string> input_columns;

  Eigen::Index inputs() const noexcept { return layers.empty() ? 0 : layers.front().inputs(); }

  Eigen::Index parameter_count() const noexcept {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Output-layer pre-activations, one per row of `x`.
  Vector logits(const Eigen::Ref<const Matrix>& x) const {
    Matrix a = x.transpose();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix z = (layers[l].weights * a).colwise() + layers[l].bias;
      if (l + 1 < layers.size()) {
        a = z.cwiseMax(Scalar(0));
      } else {
        a = std::move(z);
      }
    }
    return a.row(0).transpose();
  }

  Vector predict(const Eigen::Ref<const Matrix>& x) const {
    return logits(x).unaryExpr([](Scalar z) { return logistic(z); });
  }

  /// Mean binary cross-entropy over the rows of `x`, evaluated on logits.
  Scalar loss(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y) const {
    const Vector z = logits(x);
    Scalar total(0);
    for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
    return total / static_cast<Scalar>(z.size());
  }

  /// Mean BCE and its gradient; `grad` receives one layer per layer.
  Scalar loss_and_gradient(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                           std::vector<DenseLayer<Scalar>>& grad) const {
    const auto n = static_cast<Scalar>(x.rows());
    std::vector<Matrix> acts;  // input and hidden activations
    std::vector<Matrix> pre;   // hidden pre-activations
    acts.emplace_back(x.transpose());
    Matrix out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix z = (layers[l].weights * acts.back()).colwise() + layers[l].bias;
      if (l + 1 < layers.size()) {
        acts.emplace_back(z.cwiseMax(Scalar(0)));
        pre.emplace_back(std::move(z));
      } else {
        out = std::move(z);
      }
    }
    Scalar total(0);
    Matrix delta(1, out.cols());
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
      total += softplus(out(0, i)) - y(i) * out(0, i);
      delta(0, i) = (logistic(out(0, i)) - y(i)) / n;
    }
    grad.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
      grad[l].weights = delta * acts[l].transpose();
      grad[l].bias = delta.rowwise().sum();
      if (l > 0) {
        Matrix back = layers[l].weights.transpose() * delta;
        delta = back.cwiseProduct(pre[l - 1].unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
      }
    }
    return total / n;
  }

  Vector flat_parameters() const {
    Vector out(parameter_count());
    Eigen::Index pos = 0;
    for (const auto& l : layers) {
      out.segment(pos, l.weights.size()) = Eigen::Map<const Vector>(l.weights.data(), l.weights.size());
      pos += l.weights.size();
      out.segment(pos, l.bias.size()) = l.bias;
      pos += l.bias.size();
    }
    return out;
  }

  void set_flat_parameters(const Eigen::Ref<const Vector>& flat) {
    Eigen::Index pos = 0;
    for (auto& l : layers) {
      Eigen::Map<Vector>(l.weights.data(), l.weights.size()) = flat.segment(pos, l.weights.size());
      pos += l.weights.size();
      l.bias = flat.segment(pos, l.bias.size());
      pos += l.bias.size();
    }
  }
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten(const std::vector<DenseLayer<Scalar>>& layers) {
  Mlp<Scalar> tmp;
  tmp.layers = layers;
  return tmp.flat_parameters();
}

using MlpModel = Mlp<double>;

}  // namespace credtext
