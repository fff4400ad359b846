#ifndef GZSL_ENCODER_HPP
#define GZSL_ENCODER_HPP

// Stacked bidirectional LSTM over time-major frame batches, plus the affine
// projection into prototype space.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gzsl/autodiff.hpp"

namespace gzsl {

enum class Readout {
  kFinalState,  // [forward h at t=T | backward h at t=1]
  kMeanPool,    // time average of the top layer outputs
};

inline Readout parse_readout(const std::string& s) {
  if (s == "final") return Readout::kFinalState;
  if (s == "mean") return Readout::kMeanPool;
  throw std::invalid_argument("unknown readout '" + s + "' (expected final|mean)");
}

inline std::string readout_name(Readout r) { return r == Readout::kFinalState ? "final" : "mean"; }

struct EncoderConfig {
  Index input_width = 36;
  Index layers = 3;
  Index hidden = 64;  // per direction
  Readout readout = Readout::kFinalState;

  Index feature_width() const { return 2 * hidden; }
  Index layer_input_width(Index layer) const { return layer == 0 ? input_width : 2 * hidden; }
};

/// Weights of one LSTM direction. Gate column order is input, forget, output, candidate.
template <typename T>
struct LstmWeights {
  Tensor<T> input_weight;   // [in x 4H]
  Tensor<T> hidden_weight;  // [H x 4H]
  Tensor<T> bias;           // [4H]
};

template <typename T>
Matrix<T> uniform_matrix(Index rows, Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<T> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

template <typename T>
LstmWeights<T> init_lstm(Index input_width, Index hidden, std::mt19937_64& rng) {
  LstmWeights<T> w;
  w.input_weight = Tensor<T>({input_width, 4 * hidden},
                             uniform_matrix<T>(input_width, 4 * hidden, 1.0 / std::sqrt(double(input_width)), rng));
  w.hidden_weight =
      Tensor<T>({hidden, 4 * hidden}, uniform_matrix<T>(hidden, 4 * hidden, 1.0 / std::sqrt(double(hidden)), rng));
  w.bias = Tensor<T>({4 * hidden});
  w.bias.value().middleCols(hidden, hidden).setOnes();  // forget gate
  return w;
}

template <typename T>
struct BlstmParams {
  EncoderConfig config;
  std::vector<LstmWeights<T>> forward;
  std::vector<LstmWeights<T>> backward;

  static BlstmParams init(const EncoderConfig& config, std::mt19937_64& rng) {
    if (config.layers < 1 || config.hidden < 1 || config.input_width < 1)
      throw std::invalid_argument("encoder needs at least one layer, hidden unit and input feature");
    BlstmParams p;
    p.config = config;
    for (Index l = 0; l < config.layers; ++l) {
      p.forward.push_back(init_lstm<T>(config.layer_input_width(l), config.hidden, rng));
      p.backward.push_back(init_lstm<T>(config.layer_input_width(l), config.hidden, rng));
    }
    return p;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (Index l = 0; l < config.layers; ++l) {
      for (int d = 0; d < 2; ++d) {
        auto& w = d == 0 ? forward[l] : backward[l];
        const std::string prefix = "encoder.layer" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
        fn(prefix + "input_weight", w.input_weight);
        fn(prefix + "hidden_weight", w.hidden_weight);
        fn(prefix + "bias", w.bias);
      }
    }
  }
};

template <typename T>
struct ProjectionParams {
  Tensor<T> weight;  // [feature x proto]
  Tensor<T> bias;    // [proto]

  static ProjectionParams init(Index in, Index out, std::mt19937_64& rng) {
    return {Tensor<T>({in, out}, uniform_matrix<T>(in, out, 1.0 / std::sqrt(double(in)), rng)), Tensor<T>({out})};
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("projection.weight", weight);
    fn("projection.bias", bias);
  }
};

// ---------------------------------------------------------------------------
// Graph-bound views

template <typename T>
Var<T> bind(Graph<T>& g, Tensor<T>& t, bool trainable) {
  return trainable ? g.leaf(t) : g.constant(t.value());
}

template <typename T>
struct LstmVars {
  Var<T> input_weight, hidden_weight, bias;
  Index hidden() const { return hidden_weight.rows(); }
};

template <typename T>
LstmVars<T> bind(Graph<T>& g, LstmWeights<T>& w, bool trainable) {
  return {bind(g, w.input_weight, trainable), bind(g, w.hidden_weight, trainable), bind(g, w.bias, trainable)};
}

template <typename T>
struct BlstmVars {
  EncoderConfig config;
  std::vector<LstmVars<T>> forward, backward;
};

template <typename T>
BlstmVars<T> bind(Graph<T>& g, BlstmParams<T>& p, bool trainable) {
  BlstmVars<T> v{p.config, {}, {}};
  for (Index l = 0; l < p.config.layers; ++l) {
    v.forward.push_back(bind(g, p.forward[l], trainable));
    v.backward.push_back(bind(g, p.backward[l], trainable));
  }
  return v;
}

template <typename T>
struct ProjectionVars {
  Var<T> weight, bias;
};

template <typename T>
ProjectionVars<T> bind(Graph<T>& g, ProjectionParams<T>& p, bool trainable) {
  return {bind(g, p.weight, trainable), bind(g, p.bias, trainable)};
}

// ---------------------------------------------------------------------------
// Recurrence

template <typename T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

/// Gate nonlinearities and state update given pre-activations [B x 4H].
template <typename T>
LstmState<T> lstm_update(const Var<T>& preact, const Var<T>& c_prev, Index hidden) {
  const Var<T> gates = sigmoid(slice_cols(preact, 0, 3 * hidden));
  const Var<T> in = slice_cols(gates, 0, hidden);
  const Var<T> forget = slice_cols(gates, hidden, hidden);
  const Var<T> out = slice_cols(gates, 2 * hidden, hidden);
  const Var<T> candidate = tanh(slice_cols(preact, 3 * hidden, hidden));
  const Var<T> c = forget * c_prev + in * candidate;
  return {out * tanh(c), c};
}

/// One LSTM step on a batch: x_t [B x in], h_prev and c_prev [B x H].
template <typename T>
LstmState<T> lstm_cell(const Var<T>& x_t, const Var<T>& h_prev, const Var<T>& c_prev, const LstmVars<T>& w) {
  const Index hidden = w.hidden();
  if (x_t.cols() != w.input_weight.rows())
    throw DimensionError("lstm_cell: input width " + std::to_string(x_t.cols()) + " but weights expect " +
                         std::to_string(w.input_weight.rows()));
  if (h_prev.cols() != hidden || c_prev.cols() != hidden || h_prev.rows() != x_t.rows() ||
      c_prev.rows() != x_t.rows())
    throw DimensionError("lstm_cell: state shape " + shape_string(h_prev.rows(), h_prev.cols()) +
                         " does not match batch " + std::to_string(x_t.rows()) + " x hidden " +
                         std::to_string(hidden));
  const Var<T> preact = add_row(matmul(x_t, w.input_weight), w.bias) + matmul(h_prev, w.hidden_weight);
  return lstm_update(preact, c_prev, hidden);
}

template <typename T>
struct DirectionOutput {
  std::vector<Var<T>> steps;  // h_t indexed by time
  Var<T> last;                // final state in processing order
};

/// Runs one direction over a time-major input [T*B x in].
template <typename T>
DirectionOutput<T> run_direction(const Var<T>& input, Index batch, const LstmVars<T>& w, bool reverse,
                                 bool keep_steps) {
  Graph<T>& g = input.graph();
  const Index hidden = w.hidden();
  const Index steps = input.rows() / batch;
  // Input contribution for every step in one product.
  const Var<T> gx = add_row(matmul(input, w.input_weight), w.bias);
  Var<T> h, c = g.constant(Matrix<T>::Zero(batch, hidden));
  DirectionOutput<T> out;
  if (keep_steps) out.steps.resize(static_cast<std::size_t>(steps));
  for (Index s = 0; s < steps; ++s) {
    const Index t = reverse ? steps - 1 - s : s;
    Var<T> preact = slice_rows(gx, t * batch, batch);
    if (s > 0) preact = preact + matmul(h, w.hidden_weight);
    LstmState<T> st = lstm_update(preact, c, hidden);
    h = st.h;
    c = st.c;
    if (keep_steps) out.steps[static_cast<std::size_t>(t)] = h;
  }
  out.last = h;
  return out;
}

/// Encodes a batch of sequences stored time-major: row t*B + b is frame t of sequence b.
/// Returns features [B x 2H].
template <typename T>
Var<T> encode(const Var<T>& frames, Index batch, const BlstmVars<T>& params) {
  const EncoderConfig& cfg = params.config;
  if (batch < 1 || frames.rows() == 0) throw std::invalid_argument("encode: empty sequence batch");
  if (frames.rows() % batch != 0)
    throw DimensionError("encode: " + std::to_string(frames.rows()) + " rows is not a whole number of steps for batch " +
                         std::to_string(batch));
  if (frames.cols() != cfg.input_width)
    throw DimensionError("encode: frame width " + std::to_string(frames.cols()) + " but encoder expects " +
                         std::to_string(cfg.input_width));
  Var<T> layer_input = frames;
  for (Index l = 0; l < cfg.layers; ++l) {
    const bool top = l + 1 == cfg.layers;
    const bool keep = !top || cfg.readout == Readout::kMeanPool;
    DirectionOutput<T> fwd = run_direction(layer_input, batch, params.forward[l], false, keep);
    DirectionOutput<T> bwd = run_direction(layer_input, batch, params.backward[l], true, keep);
    if (top && cfg.readout == Readout::kFinalState) return hcat(std::vector<Var<T>>{fwd.last, bwd.last});
    layer_input = hcat(std::vector<Var<T>>{vcat(fwd.steps), vcat(bwd.steps)});
  }
  return mean_row_blocks(layer_input, layer_input.rows() / batch);
}

/// Affine map into prototype space.
template <typename T>
Var<T> project(const Var<T>& feature, const ProjectionVars<T>& p) {
  if (feature.cols() != p.weight.rows())
    throw DimensionError("project: feature width " + std::to_string(feature.cols()) + " but projection expects " +
                         std::to_string(p.weight.rows()));
  return add_row(matmul(feature, p.weight), p.bias);
}

}  // namespace gzsl

#endif  // GZSL_ENCODER_HPP
