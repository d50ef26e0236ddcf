#pragma once

// Differentiable training objectives, templated on the scalar type so the
// gradient checks can run in extended precision.

#include <Eigen/Core>
#include <cmath>

namespace schoolconn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

// log(1 + exp(z)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (z > Scalar(0) ? z : Scalar(0)) + log1p(exp(-abs(z)));
}

/// Mean binary log-loss of logits z against 0/1 targets y.
template <typename Scalar>
Scalar mean_log_loss(const VectorX<Scalar>& z, const VectorX<Scalar>& y) {
  Scalar total(0);
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
  return total / Scalar(z.size());
}

/// L2-regularised logistic regression. theta = [w; b], bias unpenalised:
///   J = mean(log-loss) + lambda/2 * |w|^2
template <typename Scalar>
struct LogisticObjective {
  const MatrixX<Scalar>& x;
  const VectorX<Scalar>& y;
  Scalar lambda;

  VectorX<Scalar> logits(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    return (x * theta.head(d)).array() + theta(d);
  }

  Scalar value(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    return mean_log_loss<Scalar>(logits(theta), y) + lambda / Scalar(2) * theta.head(d).squaredNorm();
  }

  VectorX<Scalar> gradient(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    const Scalar n(x.rows());
    VectorX<Scalar> residual = logits(theta).unaryExpr([](Scalar z) { return sigmoid(z); }) - y;
    VectorX<Scalar> g(d + 1);
    g.head(d) = x.transpose() * residual / n + lambda * theta.head(d);
    g(d) = residual.sum() / n;
    return g;
  }
};

/// Linear SVM primal with targets s in {-1, +1}:
///   J = lambda/2 * |w|^2 + mean(max(0, 1 - s * (x.w + b)))
template <typename Scalar>
struct HingeObjective {
  const MatrixX<Scalar>& x;
  const VectorX<Scalar>& s;
  Scalar lambda;

  Scalar value(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    VectorX<Scalar> margin = s.cwiseProduct((x * theta.head(d)).array().matrix() +
                                            VectorX<Scalar>::Constant(x.rows(), theta(d)));
    Scalar hinge(0);
    for (Eigen::Index i = 0; i < margin.size(); ++i) hinge += margin(i) < Scalar(1) ? Scalar(1) - margin(i) : Scalar(0);
    return lambda / Scalar(2) * theta.head(d).squaredNorm() + hinge / Scalar(x.rows());
  }

  VectorX<Scalar> subgradient(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    const Scalar n(x.rows());
    VectorX<Scalar> active(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Scalar m = s(i) * (x.row(i).dot(theta.head(d)) + theta(d));
      active(i) = m < Scalar(1) ? s(i) : Scalar(0);
    }
    VectorX<Scalar> g(d + 1);
    g.head(d) = lambda * theta.head(d) - x.transpose() * active / n;
    g(d) = -active.sum() / n;
    return g;
  }
};

enum class Activation { Logistic, Tanh, Relu };

template <typename Scalar>
Scalar activate(Activation a, Scalar v) {
  using std::tanh;
  switch (a) {
    case Activation::Logistic: return sigmoid(v);
    case Activation::Tanh: return tanh(v);
    case Activation::Relu: return v > Scalar(0) ? v : Scalar(0);
  }
  return v;
}

// Derivative expressed through the pre-activation v.
template <typename Scalar>
Scalar activate_derivative(Activation a, Scalar v) {
  using std::tanh;
  switch (a) {
    case Activation::Logistic: {
      const Scalar s = sigmoid(v);
      return s * (Scalar(1) - s);
    }
    case Activation::Tanh: {
      const Scalar t = tanh(v);
      return Scalar(1) - t * t;
    }
    case Activation::Relu: return v > Scalar(0) ? Scalar(1) : Scalar(0);
  }
  return Scalar(1);
}

/// One-hidden-layer perceptron with a sigmoid output unit. Parameters are
/// packed as [vec(W1) (hidden x inputs, column-major); b1; w2; b2].
///   J = mean(log-loss) + alpha / (2n) * (|W1|^2 + |w2|^2)
template <typename Scalar>
struct MlpObjective {
  const MatrixX<Scalar>& x;
  const VectorX<Scalar>& y;
  Eigen::Index hidden;
  Activation activation;
  Scalar alpha;

  static Eigen::Index parameter_count(Eigen::Index inputs, Eigen::Index hidden) {
    return hidden * inputs + 2 * hidden + 1;
  }

  struct Forward {
    MatrixX<Scalar> pre;   // n x hidden
    MatrixX<Scalar> post;  // n x hidden
    VectorX<Scalar> z;     // n
  };

  Forward forward(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    Eigen::Map<const MatrixX<Scalar>> w1(theta.data(), hidden, d);
    auto b1 = theta.segment(hidden * d, hidden);
    auto w2 = theta.segment(hidden * d + hidden, hidden);
    const Scalar b2 = theta(hidden * d + 2 * hidden);
    Forward f;
    f.pre = (x * w1.transpose()).rowwise() + b1.transpose();
    f.post = f.pre.unaryExpr([this](Scalar v) { return activate(activation, v); });
    f.z = (f.post * w2).array() + b2;
    return f;
  }

  Scalar penalty(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    return alpha / (Scalar(2) * Scalar(x.rows())) *
           (theta.head(hidden * d).squaredNorm() + theta.segment(hidden * d + hidden, hidden).squaredNorm());
  }

  Scalar value(const VectorX<Scalar>& theta) const {
    return mean_log_loss<Scalar>(forward(theta).z, y) + penalty(theta);
  }

  VectorX<Scalar> gradient(const VectorX<Scalar>& theta) const {
    const Eigen::Index d = x.cols();
    const Scalar n(x.rows());
    const Forward f = forward(theta);
    Eigen::Map<const MatrixX<Scalar>> w1(theta.data(), hidden, d);
    auto w2 = theta.segment(hidden * d + hidden, hidden);

    VectorX<Scalar> dz = (f.z.unaryExpr([](Scalar v) { return sigmoid(v); }) - y) / n;
    MatrixX<Scalar> da = (dz * w2.transpose()).cwiseProduct(
        f.pre.unaryExpr([this](Scalar v) { return activate_derivative(activation, v); }));

    VectorX<Scalar> g(theta.size());
    Eigen::Map<MatrixX<Scalar>> gw1(g.data(), hidden, d);
    gw1 = da.transpose() * x + alpha / n * w1;
    g.segment(hidden * d, hidden) = da.colwise().sum().transpose();
    g.segment(hidden * d + hidden, hidden) = f.post.transpose() * dz + alpha / n * w2;
    g(hidden * d + 2 * hidden) = dz.sum();
    return g;
  }
};

}  // namespace schoolconn
