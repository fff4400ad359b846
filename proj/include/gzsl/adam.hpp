#ifndef GZSL_ADAM_HPP
#define GZSL_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "gzsl/autodiff.hpp"

namespace gzsl {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed list of tensors; moment buffers mirror their shapes.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (auto* p : params_) {
      first_.push_back(Matrix<T>::Zero(p->value().rows(), p->value().cols()));
      second_.push_back(Matrix<T>::Zero(p->value().rows(), p->value().cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++steps_;
    const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(options_.beta1, double(steps_)));
    const T c2 = static_cast<T>(1.0 - std::pow(options_.beta2, double(steps_)));
    const T lr = static_cast<T>(options_.learning_rate), eps = static_cast<T>(options_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto g = params_[i]->grad().array();
      auto m = first_[i].array();
      auto v = second_[i].array();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
      params_[i]->value().array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
  }

  std::int64_t steps() const { return steps_; }
  const std::vector<Matrix<T>>& first_moments() const { return first_; }
  const std::vector<Matrix<T>>& second_moments() const { return second_; }

 private:
  std::vector<Tensor<T>*> params_;
  AdamOptions options_;
  std::vector<Matrix<T>> first_, second_;
  std::int64_t steps_ = 0;
};

}  // namespace gzsl

#endif  // GZSL_ADAM_HPP
