#ifndef GZSL_SAE_HPP
#define GZSL_SAE_HPP

// Multi-layer semantic auto-encoder: feature -> attribute space -> feature.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gzsl/autodiff.hpp"
#include "gzsl/encoder.hpp"

namespace gzsl {

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // [in x out]
  Tensor<T> bias;    // [out]
};

template <typename T>
DenseLayer<T> init_dense(Index in, Index out, std::mt19937_64& rng) {
  return {Tensor<T>({in, out}, uniform_matrix<T>(in, out, 1.0 / std::sqrt(double(in)), rng)), Tensor<T>({out})};
}

/// Encoder feature -> h -> h -> attributes, decoder attributes -> h -> h -> feature.
/// ReLU on the hidden layers only.
template <typename T>
struct SaeParams {
  std::vector<DenseLayer<T>> encoder;
  std::vector<DenseLayer<T>> decoder;

  static SaeParams init(Index feature_width, Index hidden, Index attributes, std::mt19937_64& rng) {
    if (feature_width < 1 || hidden < 1 || attributes < 1) throw std::invalid_argument("SAE widths must be positive");
    SaeParams p;
    p.encoder = {init_dense<T>(feature_width, hidden, rng), init_dense<T>(hidden, hidden, rng),
                 init_dense<T>(hidden, attributes, rng)};
    p.decoder = {init_dense<T>(attributes, hidden, rng), init_dense<T>(hidden, hidden, rng),
                 init_dense<T>(hidden, feature_width, rng)};
    return p;
  }

  Index feature_width() const { return encoder.front().weight.value().rows(); }
  Index attribute_width() const { return encoder.back().weight.value().cols(); }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (std::size_t i = 0; i < encoder.size(); ++i) {
      fn("sae.encoder" + std::to_string(i) + ".weight", encoder[i].weight);
      fn("sae.encoder" + std::to_string(i) + ".bias", encoder[i].bias);
    }
    for (std::size_t i = 0; i < decoder.size(); ++i) {
      fn("sae.decoder" + std::to_string(i) + ".weight", decoder[i].weight);
      fn("sae.decoder" + std::to_string(i) + ".bias", decoder[i].bias);
    }
  }
};

template <typename T>
struct SaeVars {
  std::vector<ProjectionVars<T>> encoder, decoder;
};

template <typename T>
SaeVars<T> bind(Graph<T>& g, SaeParams<T>& p, bool trainable) {
  SaeVars<T> v;
  for (auto& l : p.encoder) v.encoder.push_back({bind(g, l.weight, trainable), bind(g, l.bias, trainable)});
  for (auto& l : p.decoder) v.decoder.push_back({bind(g, l.weight, trainable), bind(g, l.bias, trainable)});
  return v;
}

template <typename T>
struct SaeOutput {
  Var<T> z;      // [B x attributes]
  Var<T> v_res;  // [B x feature]
};

namespace detail {
template <typename T>
Var<T> dense_stack(Var<T> x, const std::vector<ProjectionVars<T>>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (x.cols() != layers[i].weight.rows())
      throw DimensionError("SAE layer " + std::to_string(i) + ": input width " + std::to_string(x.cols()) +
                           " but weights expect " + std::to_string(layers[i].weight.rows()));
    x = add_row(matmul(x, layers[i].weight), layers[i].bias);
    if (i + 1 < layers.size()) x = relu(x);
  }
  return x;
}
}  // namespace detail

template <typename T>
SaeOutput<T> sae_forward(const Var<T>& v, const SaeVars<T>& p) {
  const Var<T> z = detail::dense_stack(v, p.encoder);
  return {z, detail::dense_stack(z, p.decoder)};
}

/// Row-wise squared error, [B x 1]. Shared by the attribute and reconstruction terms.
template <typename T>
Var<T> row_sq_error(const Var<T>& a, const Var<T>& b) {
  return sum(square(a - b), 1);
}

template <typename T>
Var<T> attr_loss(const Var<T>& z, const Var<T>& z_s) {
  if (z.cols() != z_s.cols()) throw DimensionError("attr_loss: attribute width mismatch");
  return row_sq_error(z, z_s);
}

template <typename T>
Var<T> res_loss(const Var<T>& v, const Var<T>& v_res) {
  if (v.cols() != v_res.cols()) throw DimensionError("res_loss: feature width mismatch");
  return row_sq_error(v, v_res);
}

/// Index of the closest attribute row (lowest index on ties).
template <typename T>
Index zsl_predict(const Eigen::Ref<const Matrix<T>>& z, const Matrix<T>& table) {
  if (table.rows() == 0) throw std::invalid_argument("zsl_predict: empty attribute table");
  if (z.rows() != 1 || z.cols() != table.cols())
    throw DimensionError("zsl_predict: embedding " + shape_string(z.rows(), z.cols()) + " vs table width " +
                         std::to_string(table.cols()));
  Index best = 0;
  T best_d = 0;
  for (Index r = 0; r < table.rows(); ++r) {
    T acc = 0;
    for (Index k = 0; k < table.cols(); ++k) {
      const T d = z(0, k) - table(r, k);
      acc += d * d;
    }
    if (r == 0 || acc < best_d) {
      best_d = acc;
      best = r;
    }
  }
  return best;
}

}  // namespace gzsl

#endif  // GZSL_SAE_HPP
