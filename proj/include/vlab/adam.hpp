#pragma once

#include <cmath>

#include <Eigen/Core>

namespace vlab {

/// Bias-corrected Adam over a flat parameter vector.
template <typename Scalar>
class Adam {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit Adam(Eigen::Index n, Scalar step_size = Scalar(1e-3), Scalar beta1 = Scalar(0.9),
                Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8))
      : m_(Vec::Zero(n)), v_(Vec::Zero(n)), lr_(step_size), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(Vec& params, const Vec& grad) {
    ++t_;
    m_ = b1_ * m_ + (Scalar(1) - b1_) * grad;
    v_ = b2_ * v_ + (Scalar(1) - b2_) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(b1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2_, Scalar(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

 private:
  Vec m_, v_;
  Scalar lr_, b1_, b2_, eps_;
  long t_ = 0;
};

}  // namespace vlab
