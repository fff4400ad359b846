#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

namespace gzsl {
namespace {

using M = Matrix<double>;
using testing::finite_difference;
using testing::max_relative_error;
using testing::random_matrix;
using testing::random_sequences;
using testing::small_table;
using testing::tiny_model_config;

TEST(Adam, FirstTwoStepsMatchHandComputation) {
  Tensor<double> x({1}, (M(1, 1) << 1.0).finished());
  Adam<double> opt({&x}, AdamOptions{0.1});
  // f = x^2, grad 2x.
  x.grad()(0, 0) = 2.0;
  opt.step();
  EXPECT_NEAR(x.value()(0, 0), 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-12);
  const double x1 = x.value()(0, 0);
  opt.zero_grad();
  x.grad()(0, 0) = 2 * x1;
  opt.step();
  const double m = 0.9 * (0.1 * 2.0) + 0.1 * 2 * x1;
  const double v = 0.999 * (0.001 * 4.0) + 0.001 * (2 * x1) * (2 * x1);
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(x.value()(0, 0), x1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Adam, MinimisesAQuadratic) {
  std::mt19937_64 rng(1);
  const M target = random_matrix(2, 3, rng);
  Tensor<double> x({2, 3});
  Adam<double> opt({&x}, AdamOptions{0.05});
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    Graph<double> g;
    g.backward(sum(square(g.leaf(x) - g.constant(target))));
    opt.step();
  }
  EXPECT_LE((x.value() - target).cwiseAbs().maxCoeff(), 1e-3);
}

struct Fixture {
  AttributeTable table = small_table(3, 2);
  ModelConfig config = tiny_model_config(5, 3, 4);
  std::mt19937_64 rng{17};
};

TEST(JointLoss, TotalIsWeightedMeanOfTerms) {
  Fixture f;
  auto model = Model<double>::init(f.config, 3);
  const auto seqs = random_sequences({0, 1, 2, 1}, 6, 5, f.rng);
  std::vector<const GestureSequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  const Batch<double> batch = make_batch<double>(ptrs, f.table);
  LossWeights w{0.7, 2.0, 3.0, 0.5};
  Graph<double> g;
  const auto bm = bind(g, model, kAllGroups);
  const auto loss = joint_loss(g, bm, model, batch, w);
  EXPECT_NEAR(loss.total.item(), 0.7 * loss.dce + 2.0 * loss.pl + 3.0 * loss.attr + 0.5 * loss.res, 1e-12);
}

TEST(JointLoss, EveryParameterGradientMatchesFiniteDifferences) {
  Fixture f;
  auto model = Model<double>::init(f.config, 5);
  const auto seqs = random_sequences({0, 2}, 5, 5, f.rng);
  std::vector<const GestureSequence*> ptrs = {&seqs[0], &seqs[1]};
  const Batch<double> batch = make_batch<double>(ptrs, f.table);
  const LossWeights w;
  auto value = [&]() {
    Graph<double> g;
    return joint_loss(g, bind(g, model, 0u), model, batch, w).total.item();
  };
  model.zero_grad();
  {
    Graph<double> g;
    g.backward(joint_loss(g, bind(g, model, kAllGroups), model, batch, w).total);
  }
  int count = 0;
  model.for_each_parameter([&](const std::string& name, Tensor<double>& t, unsigned) {
    const M analytic = t.grad();
    auto fn = [&](const M& x) {
      const M keep = t.value();
      t.value() = x;
      const double out = value();
      t.value() = keep;
      return out;
    };
    EXPECT_LE(max_relative_error(analytic, finite_difference(fn, t.value())), 1e-4) << name;
    ++count;
  });
  EXPECT_EQ(count, 12 + 2 + 1 + 12);
}

TEST(Train, UnseenSampleIsAProtocolError) {
  Fixture f;
  auto model = Model<double>::init(f.config, 1);
  const auto seqs = random_sequences({0, 1, 3}, 4, 5, f.rng);
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(model, seqs, f.table, tc), ProtocolError);
  EXPECT_THROW(fit_thresholds(model, seqs, f.table, tc), ProtocolError);
}

TEST(Train, SameSeedSameParameters) {
  Fixture f;
  const auto seqs = random_sequences({0, 1, 2, 0, 1, 2}, 4, 5, f.rng);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  auto a = Model<double>::init(f.config, 9);
  auto b = Model<double>::init(f.config, 9);
  train(a, seqs, f.table, tc);
  train(b, seqs, f.table, tc);
  EXPECT_EQ(testing::parameter_checksum(a), testing::parameter_checksum(b));
}

TEST(Train, LossFallsOnSeparableData) {
  Fixture f;
  std::vector<GestureSequence> seqs;
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int i = 0; i < 24; ++i) {
    const int label = i % 3;
    M frames = M::Constant(6, 5, 0.0);
    frames.col(label).setConstant(1.0);
    for (Index k = 0; k < frames.size(); ++k) frames.data()[k] += noise(f.rng);
    seqs.push_back({"train", label, i, frames});
  }
  TrainConfig tc;
  tc.epochs = 40;
  tc.learning_rate = 1e-2;
  auto model = Model<double>::init(f.config, 2);
  const auto hist = train(model, seqs, f.table, tc);
  EXPECT_LT(hist.back().total, 0.5 * hist.front().total);
  const Inference<double> inf = infer(model, seqs);
  int correct = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) correct += inf.verdicts[i].nearest_class == f.table.seen_index(seqs[i].label);
  EXPECT_EQ(correct, 24);
}

TEST(Train, FrozenGroupsDoNotMove) {
  Fixture f;
  const auto seqs = random_sequences({0, 1, 2}, 4, 5, f.rng);
  auto model = Model<double>::init(f.config, 4);
  const M enc_before = model.encoder.forward[0].input_weight.value();
  const M proto_before = model.bank.prototypes.value();
  const M sae_before = model.sae.encoder[0].weight.value();
  TrainConfig tc;
  tc.epochs = 2;
  train(model, seqs, f.table, tc, kSaeGroup);
  EXPECT_EQ(model.encoder.forward[0].input_weight.value(), enc_before);
  EXPECT_EQ(model.bank.prototypes.value(), proto_before);
  EXPECT_NE(model.sae.encoder[0].weight.value(), sae_before);
}

TEST(Train, ConfigValidation) {
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.learning_rate = 0;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.beta = -1;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
}

// Scalar reference for the threshold objective.
double reference_threshold_loss(const M& th, const std::vector<double>& dm, const std::vector<Index>& near, double beta) {
  double acc = 0;
  for (std::size_t i = 0; i < dm.size(); ++i) {
    const double delta = dm[i] - th.data()[near[i]];
    if (delta > 0) acc += delta + 1.0;
  }
  double reg = 0;
  for (Index k = 0; k < th.size(); ++k) reg += th.data()[k] * th.data()[k];
  return (dm.empty() ? 0.0 : acc / double(dm.size())) + beta * reg;
}

TEST(ThresholdLoss, PiecewiseHandValues) {
  const M th = (M(1, 2) << 1.0, 2.0).finished();
  // d - th = -0.5 (no cost), 0 (no cost), 0.5 (cost 1.5).
  const std::vector<double> dm = {0.5, 2.0, 1.5};
  const std::vector<Index> near = {0, 1, 0};
  EXPECT_DOUBLE_EQ(threshold_loss_value<double>(th, dm, near, 0.0), 1.5 / 3.0);
  EXPECT_DOUBLE_EQ(threshold_loss_value<double>(th, dm, near, 0.1), 0.5 + 0.1 * 5.0);
  EXPECT_DOUBLE_EQ(threshold_loss_value<double>(th, {}, {}, 0.1), 0.5);
}

TEST(ThresholdLoss, MatchesScalarReference) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const M th = random_matrix(3, 2, rng).cwiseAbs();
    std::vector<double> dm;
    std::vector<Index> near;
    for (int i = 0; i < 10; ++i) {
      dm.push_back(u(rng));
      near.push_back(static_cast<Index>(rng() % 6));
    }
    const double beta = u(rng) * 0.1;
    EXPECT_EQ(threshold_loss_value<double>(th, dm, near, beta), reference_threshold_loss(th, dm, near, beta));
  }
}

TEST(ThresholdLoss, GradientIsPiecewise) {
  const std::vector<double> dm = {3.0, 0.1};
  const std::vector<Index> near = {0, 0};
  Graph<double> g;
  const auto th = g.variable((M(1, 1) << 1.0).finished());
  g.backward(threshold_loss<double>(th, dm, near, 0.5));
  // One sample beyond the radius (-1/N) plus 2*beta*th.
  EXPECT_DOUBLE_EQ(th.grad()(0, 0), -0.5 + 1.0);
}

TEST(FitThresholds, LossNeverIncreasesAndRadiiStayNonNegative) {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> gd(2.0, 0.3);
  for (double beta : {0.0, 0.01, 0.1, 1.0}) {
    ThresholdSamples<double> s;
    for (int i = 0; i < 300; ++i) {
      s.min_distance.push_back(gd(rng));
      s.nearest.push_back(static_cast<Index>(rng() % 5));
    }
    std::vector<double> hist;
    const auto th = fit_thresholds(s, 5, 1, ThresholdFitOptions{beta, 200, 0.01}, &hist);
    ASSERT_EQ(hist.size(), 201u);
    for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] + 1e-12) << beta << " " << i;
    EXPECT_GE(th.radii.minCoeff(), 0.0);
  }
}

TEST(FitThresholds, InitialisedAtPerPrototypeMean) {
  ThresholdSamples<double> s{{0.2, 0.4, 3.0}, {0, 0, 2}};
  const auto th = fit_thresholds(s, 3, 1, ThresholdFitOptions{0.0, 0, 0.01});
  EXPECT_DOUBLE_EQ(th.radii(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(th.radii(1, 0), 0.0);  // no samples
  EXPECT_DOUBLE_EQ(th.radii(2, 0), 3.0);
}

TEST(FitThresholds, LargerBetaGivesSmallerRadii) {
  std::mt19937_64 rng(10);
  std::gamma_distribution<double> gd(2.0, 0.5);
  ThresholdSamples<double> s;
  for (int i = 0; i < 200; ++i) {
    s.min_distance.push_back(gd(rng));
    s.nearest.push_back(static_cast<Index>(rng() % 2));
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double beta : {0.005, 0.05, 0.5}) {
    const auto th = fit_thresholds(s, 2, 1, ThresholdFitOptions{beta, 400, 0.05});
    EXPECT_LE(th.radii.sum(), prev);
    prev = th.radii.sum();
  }
}

TEST(FitThresholds, CorrectOnlyDropsMisclassifiedSamples) {
  const AttributeTable table = small_table(2, 1);
  Inference<double> inf;
  inf.verdicts = {{0, 0, 0.5, false}, {1, 1, 0.7, false}, {0, 0, 0.9, false}};
  std::vector<GestureSequence> data = {{"train", 0, 0, {}}, {"train", 0, 1, {}}, {"train", 1, 2, {}}};
  EXPECT_EQ(threshold_samples(inf, data, table, false).nearest.size(), 3u);
  const auto s = threshold_samples(inf, data, table, true);
  ASSERT_EQ(s.nearest.size(), 1u);
  EXPECT_DOUBLE_EQ(s.min_distance[0], 0.5);
}

}  // namespace
}  // namespace gzsl
