#ifndef GZSL_MODEL_HPP
#define GZSL_MODEL_HPP

// The full two-branch model: BLSTM encoder, prototype projection and bank,
// semantic auto-encoder, fitted thresholds and input normalization.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gzsl/autodiff.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/encoder.hpp"
#include "gzsl/prototype.hpp"
#include "gzsl/sae.hpp"

namespace gzsl {

struct ModelConfig {
  EncoderConfig encoder;
  Index proto_dim = 20;
  Index classes = 16;
  Index per_class = 1;
  double gamma = 1.0;
  Index sae_hidden = 64;
  Index attributes = 11;
};

enum ParamGroup : unsigned {
  kEncoderGroup = 1u,     // BLSTM and projection (theta)
  kPrototypeGroup = 2u,   // M
  kSaeGroup = 4u,         // phi
  kAllGroups = 7u,
};

template <typename T>
struct Model {
  ModelConfig config;
  BlstmParams<T> encoder;
  ProjectionParams<T> projection;
  PrototypeBank<T> bank;
  SaeParams<T> sae;
  std::optional<ThresholdSet<T>> thresholds;
  std::optional<NormalizationStats> normalization;

  static Model init(const ModelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Model m;
    m.config = config;
    m.encoder = BlstmParams<T>::init(config.encoder, rng);
    m.projection = ProjectionParams<T>::init(config.encoder.feature_width(), config.proto_dim, rng);
    m.bank = PrototypeBank<T>::init(config.classes, config.per_class, config.proto_dim, static_cast<T>(config.gamma), rng);
    m.sae = SaeParams<T>::init(config.encoder.feature_width(), config.sae_hidden, config.attributes, rng);
    return m;
  }

  /// Visits (name, tensor, group) for every learnable tensor in a fixed order.
  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    encoder.for_each([&](const std::string& n, Tensor<T>& t) { fn(n, t, kEncoderGroup); });
    projection.for_each([&](const std::string& n, Tensor<T>& t) { fn(n, t, kEncoderGroup); });
    bank.for_each([&](const std::string& n, Tensor<T>& t) { fn(n, t, kPrototypeGroup); });
    sae.for_each([&](const std::string& n, Tensor<T>& t) { fn(n, t, kSaeGroup); });
  }

  std::vector<Tensor<T>*> parameters(unsigned groups = kAllGroups) {
    std::vector<Tensor<T>*> out;
    for_each_parameter([&](const std::string&, Tensor<T>& t, unsigned g) {
      if (groups & g) out.push_back(&t);
    });
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

template <typename T>
struct BoundModel {
  BlstmVars<T> encoder;
  ProjectionVars<T> projection;
  Var<T> prototypes;
  SaeVars<T> sae;
};

/// Places the model's tensors in a graph; groups outside `trainable` enter as constants.
template <typename T>
BoundModel<T> bind(Graph<T>& g, Model<T>& m, unsigned trainable) {
  return {bind(g, m.encoder, (trainable & kEncoderGroup) != 0), bind(g, m.projection, (trainable & kEncoderGroup) != 0),
          bind(g, m.bank.prototypes, (trainable & kPrototypeGroup) != 0), bind(g, m.sae, (trainable & kSaeGroup) != 0)};
}

/// A batch of equal-length sequences, stacked time-major.
template <typename T>
struct Batch {
  Matrix<T> frames;           // [steps*B x d_in]
  Index size = 0;
  std::vector<Index> labels;  // seen-class index per sample
  Matrix<T> attributes;       // [B x A]
};

template <typename T>
Matrix<T> stack_time_major(std::span<const GestureSequence* const> seqs) {
  if (seqs.empty()) throw std::invalid_argument("empty batch");
  const Index steps = seqs.front()->frames.rows();
  const Index width = seqs.front()->frames.cols();
  if (steps == 0) throw std::invalid_argument("empty sequence");
  const Index b = static_cast<Index>(seqs.size());
  Matrix<T> out(steps * b, width);
  for (Index i = 0; i < b; ++i) {
    const auto& f = seqs[static_cast<std::size_t>(i)]->frames;
    if (f.rows() != steps || f.cols() != width)
      throw DimensionError("batch sequences must share length and width; got " + shape_string(f.rows(), f.cols()) +
                           " vs " + shape_string(steps, width));
    for (Index t = 0; t < steps; ++t) out.row(t * b + i) = f.row(t).template cast<T>();
  }
  return out;
}

/// Builds a training batch; unseen labels are a protocol violation.
template <typename T>
Batch<T> make_batch(std::span<const GestureSequence* const> seqs, const AttributeTable& table) {
  Batch<T> b;
  b.frames = stack_time_major<T>(seqs);
  b.size = static_cast<Index>(seqs.size());
  std::vector<int> labels;
  for (const auto* s : seqs) {
    if (!table.is_seen(s->label))
      throw ProtocolError("training batch contains sample " + std::to_string(s->sample_id) + " of unseen class " +
                          (s->label >= 0 && s->label < table.class_count() ? "'" + table.info(s->label).name + "'"
                                                                           : std::to_string(s->label)));
    b.labels.push_back(table.seen_index(s->label));
    labels.push_back(s->label);
  }
  b.attributes = table.rows<T>(labels);
  return b;
}

template <typename T>
struct ForwardPass {
  Var<T> features;   // f(x) [B x 2H]
  Var<T> projected;  // p(x) [B x proto]
  Var<T> distances;  // [B x C*K]
  std::optional<SaeOutput<T>> sae;
};

template <typename T>
ForwardPass<T> forward(Graph<T>& g, const BoundModel<T>& m, const Matrix<T>& frames, Index batch, bool with_sae) {
  ForwardPass<T> out;
  out.features = encode(g.constant(frames), batch, m.encoder);
  out.projected = project(out.features, m.projection);
  out.distances = distances(out.projected, m.prototypes);
  if (with_sae) out.sae = sae_forward(out.features, m.sae);
  return out;
}

/// Weights of the four joint-objective terms.
struct LossWeights {
  double dce = 1.0;
  double lambda1 = 5.0;   // prototype loss
  double lambda2 = 5.0;   // attribute loss
  double lambda3 = 0.05;  // reconstruction loss
};

template <typename T>
struct LossBreakdown {
  Var<T> total;
  double dce = 0, pl = 0, attr = 0, res = 0;  // batch means of the unweighted terms
};

/// Mean over the batch of w_dce*L_dce + l1*L_pl + l2*L_attr + l3*L_res.
template <typename T>
LossBreakdown<T> joint_loss(Graph<T>& g, const BoundModel<T>& m, const Model<T>& model, const Batch<T>& batch,
                            const LossWeights& w) {
  if (batch.size < 1) throw std::invalid_argument("joint_loss: empty batch");
  const bool with_sae = w.lambda2 != 0.0 || w.lambda3 != 0.0;
  const ForwardPass<T> fp = forward(g, m, batch.frames, batch.size, with_sae);
  const Var<T> dce = dce_loss(fp.distances, std::span<const Index>(batch.labels), model.bank.classes,
                              model.bank.per_class, model.bank.gamma);
  const Var<T> pl = pl_loss(fp.distances, std::span<const Index>(batch.labels), model.bank.classes, model.bank.per_class);
  Var<T> per_sample = scale(dce, static_cast<T>(w.dce)) + scale(pl, static_cast<T>(w.lambda1));
  LossBreakdown<T> out;
  out.dce = static_cast<double>(dce.value().mean());
  out.pl = static_cast<double>(pl.value().mean());
  if (with_sae) {
    const Var<T> attr = attr_loss(fp.sae->z, g.constant(batch.attributes));
    const Var<T> res = res_loss(fp.features, fp.sae->v_res);
    per_sample = per_sample + scale(attr, static_cast<T>(w.lambda2)) + scale(res, static_cast<T>(w.lambda3));
    out.attr = static_cast<double>(attr.value().mean());
    out.res = static_cast<double>(res.value().mean());
  }
  out.total = mean(per_sample);
  return out;
}

// ---------------------------------------------------------------------------
// Batched inference

template <typename T>
struct Inference {
  Matrix<T> features;   // [N x 2H]
  Matrix<T> projected;  // [N x proto]
  Matrix<T> z;          // [N x A]
  std::vector<DetectorVerdict<T>> verdicts;  // nearest prototype; `accepted` left false
};

template <typename T>
Inference<T> infer(Model<T>& model, std::span<const GestureSequence> seqs, Index batch_size = 32) {
  Inference<T> out;
  const Index n = static_cast<Index>(seqs.size());
  out.features.resize(n, model.config.encoder.feature_width());
  out.projected.resize(n, model.config.proto_dim);
  out.z.resize(n, model.config.attributes);
  for (Index start = 0; start < n; start += batch_size) {
    const Index b = std::min(batch_size, n - start);
    std::vector<const GestureSequence*> ptrs;
    for (Index i = 0; i < b; ++i) ptrs.push_back(&seqs[static_cast<std::size_t>(start + i)]);
    Graph<T> g;
    const BoundModel<T> bm = bind(g, model, 0u);
    const ForwardPass<T> fp = forward(g, bm, stack_time_major<T>(ptrs), b, true);
    out.features.middleRows(start, b) = fp.features.value();
    out.projected.middleRows(start, b) = fp.projected.value();
    out.z.middleRows(start, b) = fp.sae->z.value();
  }
  for (Index i = 0; i < n; ++i)
    out.verdicts.push_back(classify<T>(out.projected.row(i), model.bank.prototypes.value(), model.bank.per_class));
  return out;
}

}  // namespace gzsl

#endif  // GZSL_MODEL_HPP
