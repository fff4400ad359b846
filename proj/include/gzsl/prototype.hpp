#ifndef GZSL_PROTOTYPE_HPP
#define GZSL_PROTOTYPE_HPP

// Learnable class prototypes: distance-based cross entropy, prototype loss,
// nearest-prototype classification and threshold-based rejection.

#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gzsl/autodiff.hpp"

namespace gzsl {

class ThresholdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// C x K prototypes in a `width`-dimensional space. Row i*K + j of the
/// storage matrix is prototype j of class i.
template <typename T>
struct PrototypeBank {
  Tensor<T> prototypes;
  Index classes = 0;
  Index per_class = 1;
  T gamma = T(1);

  Index width() const { return prototypes.value().cols(); }
  Index size() const { return classes * per_class; }

  static PrototypeBank init(Index classes, Index per_class, Index width, T gamma, std::mt19937_64& rng) {
    if (classes < 1 || per_class < 1 || width < 1) throw std::invalid_argument("prototype bank needs C, K, width >= 1");
    std::normal_distribution<double> dist(0.0, 0.1);
    Matrix<T> m(classes * per_class, width);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
    return {Tensor<T>({classes, per_class, width}, std::move(m)), classes, per_class, gamma};
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("prototypes", prototypes);
  }
};

/// Per-prototype acceptance radii in squared-distance units.
template <typename T>
struct ThresholdSet {
  Matrix<T> radii;  // [C x K]

  T at(Index flat_prototype) const { return radii.data()[flat_prototype]; }
};

template <typename T>
struct DetectorVerdict {
  Index nearest_class = 0;      // epsilon(x), 0-based seen index
  Index nearest_prototype = 0;  // flat index i*K + j
  T min_distance = T(0);        // d_m(x)
  bool accepted = false;
};

// ---------------------------------------------------------------------------
// Graph ops

/// Squared distances from projections [B x d] to every prototype; result [B x C*K].
template <typename T>
Var<T> distances(const Var<T>& projected, const Var<T>& prototypes) {
  if (projected.cols() != prototypes.cols())
    throw DimensionError("distances: projection width " + std::to_string(projected.cols()) +
                         " but prototypes have width " + std::to_string(prototypes.cols()));
  return pairwise_sq_dist(projected, prototypes);
}

namespace detail {
inline std::vector<Index> class_columns(std::span<const Index> labels, Index classes, Index per_class, Index stride) {
  std::vector<Index> flat;
  flat.reserve(labels.size() * static_cast<std::size_t>(per_class));
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= classes)
      throw std::out_of_range("label " + std::to_string(labels[b]) + " outside the " + std::to_string(classes) +
                              " seen classes");
    for (Index j = 0; j < per_class; ++j)
      flat.push_back(static_cast<Index>(b) * stride + labels[b] * per_class + j);
  }
  return flat;
}
}  // namespace detail

/// Distance-based cross entropy per sample, [B x 1]:
///   -log( sum_j exp(-gamma d(p, m_yj)) / sum_kl exp(-gamma d(p, m_kl)) )
/// evaluated as lse(all logits) - lse(class-y logits).
template <typename T>
Var<T> dce_loss(const Var<T>& dist, std::span<const Index> labels, Index classes, Index per_class, T gamma) {
  if (dist.cols() != classes * per_class || dist.rows() != static_cast<Index>(labels.size()))
    throw DimensionError("dce_loss: distance matrix " + shape_string(dist.rows(), dist.cols()) + " for " +
                         std::to_string(labels.size()) + " labels and " + std::to_string(classes * per_class) +
                         " prototypes");
  const Var<T> logits = scale(dist, -gamma);
  const Index batch = dist.rows();
  const Var<T> own = take(logits, detail::class_columns(labels, classes, per_class, dist.cols()), batch, per_class);
  return logsumexp_rows(logits) - logsumexp_rows(own);
}

/// Squared distance to the closest prototype of the true class, [B x 1].
template <typename T>
Var<T> pl_loss(const Var<T>& dist, std::span<const Index> labels, Index classes, Index per_class) {
  if (dist.cols() != classes * per_class || dist.rows() != static_cast<Index>(labels.size()))
    throw DimensionError("pl_loss: distance matrix " + shape_string(dist.rows(), dist.cols()) +
                         " does not match labels/prototypes");
  const Index batch = dist.rows();
  const Var<T> own = take(dist, detail::class_columns(labels, classes, per_class, dist.cols()), batch, per_class);
  return min(own, 1).values;
}

// ---------------------------------------------------------------------------
// Inference (plain values, no graph)

/// Nearest prototype; ties go to the lowest class, then the lowest prototype index.
template <typename T>
DetectorVerdict<T> classify(const Eigen::Ref<const Matrix<T>>& projected_row, const Matrix<T>& prototypes,
                            Index per_class) {
  if (prototypes.rows() == 0) throw std::invalid_argument("classify: empty prototype bank");
  if (projected_row.cols() != prototypes.cols() || projected_row.rows() != 1)
    throw DimensionError("classify: projection " + shape_string(projected_row.rows(), projected_row.cols()) +
                         " vs prototype width " + std::to_string(prototypes.cols()));
  DetectorVerdict<T> v;
  for (Index r = 0; r < prototypes.rows(); ++r) {
    T acc = 0;
    for (Index k = 0; k < prototypes.cols(); ++k) {
      const T d = projected_row(0, k) - prototypes(r, k);
      acc += d * d;
    }
    if (r == 0 || acc < v.min_distance) {
      v.min_distance = acc;
      v.nearest_prototype = r;
    }
  }
  v.nearest_class = v.nearest_prototype / per_class;
  return v;
}

/// Nearest-prototype verdict plus the inclusive threshold test d_m <= Th.
template <typename T>
DetectorVerdict<T> detect(const Eigen::Ref<const Matrix<T>>& projected_row, const PrototypeBank<T>& bank,
                          const std::optional<ThresholdSet<T>>& thresholds) {
  if (!thresholds) throw ThresholdError("detect: thresholds have not been fitted");
  if (thresholds->radii.size() != bank.size())
    throw DimensionError("detect: " + std::to_string(thresholds->radii.size()) + " thresholds for " +
                         std::to_string(bank.size()) + " prototypes");
  DetectorVerdict<T> v = classify<T>(projected_row, bank.prototypes.value(), bank.per_class);
  v.accepted = v.min_distance <= thresholds->at(v.nearest_prototype);
  return v;
}

}  // namespace gzsl

#endif  // GZSL_PROTOTYPE_HPP
