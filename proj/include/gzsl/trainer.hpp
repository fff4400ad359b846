#ifndef GZSL_TRAINER_HPP
#define GZSL_TRAINER_HPP

// Joint end-to-end training with Adam, then threshold fitting on the frozen
// network.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gzsl/adam.hpp"
#include "gzsl/autodiff.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/model.hpp"

namespace gzsl {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  LossWeights weights;
  double beta = 0.1;
  double learning_rate = 1e-3;
  Index batch_size = 8;
  Index epochs = 100;
  std::uint64_t seed = 1;
  Index threshold_epochs = 200;
  double threshold_learning_rate = 0.01;
  bool threshold_correct_only = false;

  void validate() const {
    if (!(learning_rate > 0) || !(threshold_learning_rate > 0)) throw std::invalid_argument("learning rates must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 0 || threshold_epochs < 0) throw std::invalid_argument("epoch counts must be >= 0");
    if (weights.dce < 0 || weights.lambda1 < 0 || weights.lambda2 < 0 || weights.lambda3 < 0 || beta < 0)
      throw std::invalid_argument("loss weights and beta must be >= 0");
  }
};

struct EpochLoss {
  Index epoch = 0;
  double dce = 0, pl = 0, attr = 0, res = 0, total = 0;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Trains the tensors in `groups` on seen-class sequences (already normalized).
/// Returns the per-epoch sample-weighted mean of each loss term.
template <typename T>
std::vector<EpochLoss> train(Model<T>& model, std::span<const GestureSequence> data, const AttributeTable& table,
                             const TrainConfig& config, unsigned groups = kAllGroups,
                             const EpochCallback& on_epoch = nullptr) {
  config.validate();
  require_seen(data, table, "train");
  if (data.empty()) throw std::invalid_argument("train: no training sequences");
  if (static_cast<Index>(table.seen_labels().size()) != model.config.classes)
    throw DimensionError("train: model has " + std::to_string(model.config.classes) + " classes but the table has " +
                         std::to_string(table.seen_labels().size()) + " seen classes");

  Adam<T> adam(model.parameters(groups), AdamOptions{config.learning_rate});
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochLoss> history;
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLoss acc;
    acc.epoch = epoch + 1;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const GestureSequence*> ptrs;
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&data[order[i]]);
      const Batch<T> batch = make_batch<T>(ptrs, table);
      Graph<T> g;
      const BoundModel<T> bm = bind(g, model, groups);
      const LossBreakdown<T> loss = joint_loss(g, bm, model, batch, config.weights);
      const double total = static_cast<double>(loss.total.item());
      if (!std::isfinite(total))
        throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", batch starting at " + std::to_string(start) + " (dce=" + std::to_string(loss.dce) +
                               " pl=" + std::to_string(loss.pl) + " attr=" + std::to_string(loss.attr) +
                               " res=" + std::to_string(loss.res) + ")");
      adam.zero_grad();
      g.backward(loss.total);
      adam.step();
      const double n = static_cast<double>(end - start);
      acc.dce += loss.dce * n;
      acc.pl += loss.pl * n;
      acc.attr += loss.attr * n;
      acc.res += loss.res * n;
      acc.total += total * n;
    }
    const double n = static_cast<double>(data.size());
    acc.dce /= n;
    acc.pl /= n;
    acc.attr /= n;
    acc.res /= n;
    acc.total /= n;
    history.push_back(acc);
    if (on_epoch) on_epoch(acc);
  }
  return history;
}

/// Trains only the SAE on fixed features (the separately trained variant).
template <typename T>
std::vector<EpochLoss> train_sae_on_features(Model<T>& model, const Matrix<T>& features, std::span<const int> labels,
                                             const AttributeTable& table, const TrainConfig& config,
                                             const EpochCallback& on_epoch = nullptr) {
  config.validate();
  for (int l : labels)
    if (!table.is_seen(l)) throw ProtocolError("train_sae_on_features: unseen class in training features");
  const Matrix<T> targets = table.rows<T>(labels);
  Adam<T> adam(model.parameters(kSaeGroup), AdamOptions{config.learning_rate});
  std::mt19937_64 rng(config.seed);
  std::vector<Index> order(labels.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<EpochLoss> history;
  const T l2 = static_cast<T>(config.weights.lambda2), l3 = static_cast<T>(config.weights.lambda3);
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLoss acc;
    acc.epoch = epoch + 1;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const Index b = static_cast<Index>(end - start);
      Matrix<T> v(b, features.cols()), zs(b, targets.cols());
      for (Index i = 0; i < b; ++i) {
        v.row(i) = features.row(order[start + static_cast<std::size_t>(i)]);
        zs.row(i) = targets.row(order[start + static_cast<std::size_t>(i)]);
      }
      Graph<T> g;
      const SaeVars<T> sv = bind(g, model.sae, true);
      const Var<T> vin = g.constant(v);
      const SaeOutput<T> out = sae_forward(vin, sv);
      const Var<T> attr = attr_loss(out.z, g.constant(zs));
      const Var<T> res = res_loss(vin, out.v_res);
      const Var<T> total = mean(scale(attr, l2) + scale(res, l3));
      if (!std::isfinite(static_cast<double>(total.item())))
        throw TrainingDiverged("SAE training diverged at epoch " + std::to_string(epoch + 1));
      adam.zero_grad();
      g.backward(total);
      adam.step();
      acc.attr += static_cast<double>(attr.value().sum());
      acc.res += static_cast<double>(res.value().sum());
      acc.total += static_cast<double>(total.item()) * static_cast<double>(b);
    }
    const double n = static_cast<double>(labels.size());
    acc.attr /= n;
    acc.res /= n;
    acc.total /= n;
    history.push_back(acc);
    if (on_epoch) on_epoch(acc);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Thresholds

/// Threshold objective: mean_i h(d_m(x_i) - Th(x_i)) + beta*||Th||^2
/// with h(x) = 0 for x <= 0 and x + 1 otherwise. `th` is [C x K]; `nearest`
/// holds flat prototype indices.
template <typename T>
Var<T> threshold_loss(const Var<T>& th, std::span<const T> min_distance, std::span<const Index> nearest, T beta) {
  if (min_distance.size() != nearest.size()) throw DimensionError("threshold_loss: distance/index count mismatch");
  const Index protos = th.value().size();
  for (Index k : nearest)
    if (k < 0 || k >= protos) throw DimensionError("threshold_loss: prototype index out of range");
  // Sequential sums, left to right, so the value is reproducible term by term.
  const T* radii = th.value().data();
  const std::size_t n = nearest.size();
  T hinge = 0;
  std::vector<Index> beyond;  // prototypes of samples outside their radius
  for (std::size_t i = 0; i < n; ++i) {
    const T delta = min_distance[i] - radii[nearest[i]];
    if (delta > T(0)) {
      hinge += delta + T(1);
      beyond.push_back(nearest[i]);
    }
  }
  T reg = 0;
  for (Index k = 0; k < protos; ++k) reg += radii[k] * radii[k];
  const T value = (n ? hinge / static_cast<T>(n) : T(0)) + beta * reg;
  const std::size_t id = th.id();
  // The +1 jump carries no gradient; a sample exactly on its radius contributes none.
  return th.graph().push(Matrix<T>::Constant(1, 1, value), detail::any_grad(th),
                         [id, n, beta, beyond = std::move(beyond)](Graph<T>& g, const Matrix<T>& up) {
                           Matrix<T> d = (T(2) * beta * up(0, 0)) * g.value(id);
                           const T w = up(0, 0) / static_cast<T>(n);
                           for (Index k : beyond) d.data()[k] -= w;
                           g.accumulate(id, d);
                         });
}

template <typename T>
T threshold_loss_value(const Matrix<T>& th, std::span<const T> min_distance, std::span<const Index> nearest, T beta) {
  Graph<T> g;
  return threshold_loss(g.constant(th), min_distance, nearest, beta).item();
}

/// Samples used for threshold fitting: nearest-prototype distances of the
/// training set under the frozen network.
template <typename T>
struct ThresholdSamples {
  std::vector<T> min_distance;
  std::vector<Index> nearest;  // flat prototype index
};

template <typename T>
ThresholdSamples<T> threshold_samples(const Inference<T>& inf, std::span<const GestureSequence> data,
                                      const AttributeTable& table, bool correct_only) {
  ThresholdSamples<T> s;
  for (std::size_t i = 0; i < inf.verdicts.size(); ++i) {
    const auto& v = inf.verdicts[i];
    if (correct_only && v.nearest_class != table.seen_index(data[i].label)) continue;
    s.min_distance.push_back(v.min_distance);
    s.nearest.push_back(v.nearest_prototype);
  }
  return s;
}

struct ThresholdFitOptions {
  double beta = 0.1;
  Index epochs = 200;
  double learning_rate = 0.01;
};

/// Gradient descent on the thresholds alone, starting from the per-prototype
/// mean distance (0 for prototypes with no samples). Each prototype's step is
/// halved until its share of the objective does not increase, so the total
/// loss is non-increasing; results stay >= 0.
template <typename T>
ThresholdSet<T> fit_thresholds(const ThresholdSamples<T>& samples, Index classes, Index per_class,
                               const ThresholdFitOptions& opt, std::vector<double>* loss_history = nullptr) {
  const Index protos = classes * per_class;
  const std::size_t n = samples.nearest.size();
  const T beta = static_cast<T>(opt.beta);
  const T inv_n = n ? T(1) / static_cast<T>(n) : T(0);
  std::vector<std::vector<T>> members(static_cast<std::size_t>(protos));
  for (std::size_t i = 0; i < n; ++i) {
    if (samples.nearest[i] < 0 || samples.nearest[i] >= protos) throw DimensionError("fit_thresholds: prototype index out of range");
    members[static_cast<std::size_t>(samples.nearest[i])].push_back(samples.min_distance[i]);
  }
  Matrix<T> th = Matrix<T>::Zero(classes, per_class);
  for (Index k = 0; k < protos; ++k) {
    const auto& m = members[static_cast<std::size_t>(k)];
    if (!m.empty()) th.data()[k] = std::accumulate(m.begin(), m.end(), T(0)) / static_cast<T>(m.size());
  }
  auto share = [&](Index k, T t) {
    T acc = 0;
    for (T d : members[static_cast<std::size_t>(k)])
      if (d - t > T(0)) acc += d - t + T(1);
    return acc * inv_n + beta * t * t;
  };
  const std::span<const T> dm(samples.min_distance);
  const std::span<const Index> near(samples.nearest);
  for (Index epoch = 0; epoch < opt.epochs; ++epoch) {
    Graph<T> g;
    const Var<T> tv = g.variable(th);
    const Var<T> loss = threshold_loss(tv, dm, near, beta);
    if (loss_history) loss_history->push_back(static_cast<double>(loss.item()));
    g.backward(loss);
    const Matrix<T>& grad = tv.grad();
    for (Index k = 0; k < protos; ++k) {
      const T current = th.data()[k];
      const T before = share(k, current);
      T step = static_cast<T>(opt.learning_rate) * grad.data()[k];
      for (int halving = 0; halving < 40 && step != T(0); ++halving) {
        const T proposal = std::max(T(0), current - step);
        if (share(k, proposal) <= before) {
          th.data()[k] = proposal;
          break;
        }
        step /= T(2);
      }
    }
  }
  if (loss_history) loss_history->push_back(static_cast<double>(threshold_loss_value(th, dm, near, beta)));
  return ThresholdSet<T>{th};
}

/// Fits thresholds from seen-class training sequences; the network and
/// prototypes are only read.
template <typename T>
ThresholdSet<T> fit_thresholds(Model<T>& model, std::span<const GestureSequence> data, const AttributeTable& table,
                               const TrainConfig& config, std::vector<double>* loss_history = nullptr) {
  require_seen(data, table, "fit_thresholds");
  const Inference<T> inf = infer(model, data);
  const ThresholdSamples<T> s = threshold_samples(inf, data, table, config.threshold_correct_only);
  return fit_thresholds(s, model.bank.classes, model.bank.per_class,
                        ThresholdFitOptions{config.beta, config.threshold_epochs, config.threshold_learning_rate},
                        loss_history);
}

}  // namespace gzsl

#endif  // GZSL_TRAINER_HPP
