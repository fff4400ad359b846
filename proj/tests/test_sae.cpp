#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace gzsl {
namespace {

using M = Matrix<double>;
using testing::finite_difference;
using testing::max_relative_error;
using testing::random_matrix;

TEST(Sae, ShapesAndParameterNames) {
  std::mt19937_64 rng(1);
  auto p = SaeParams<double>::init(128, 64, 11, rng);
  EXPECT_EQ(p.feature_width(), 128);
  EXPECT_EQ(p.attribute_width(), 11);
  std::vector<std::string> names;
  p.for_each([&](const std::string& n, Tensor<double>&) { names.push_back(n); });
  ASSERT_EQ(names.size(), 12u);
  EXPECT_EQ(names.front(), "sae.encoder0.weight");
  EXPECT_EQ(names.back(), "sae.decoder2.bias");
  Graph<double> g;
  const auto out = sae_forward(g.constant(random_matrix(3, 128, rng)), bind(g, p, false));
  EXPECT_EQ(out.z.rows(), 3);
  EXPECT_EQ(out.z.cols(), 11);
  EXPECT_EQ(out.v_res.cols(), 128);
}

TEST(Sae, ForwardMatchesExplicitLayers) {
  std::mt19937_64 rng(2);
  auto p = SaeParams<double>::init(6, 5, 3, rng);
  p.for_each([&](const std::string&, Tensor<double>& t) { t.value() = random_matrix(t.value().rows(), t.value().cols(), rng); });
  const M v = random_matrix(2, 6, rng);
  auto layer = [](const M& x, const DenseLayer<double>& l, bool act) {
    M y = (x * l.weight.value()).rowwise() + l.bias.value().row(0);
    return act ? M(y.cwiseMax(0.0)) : y;
  };
  M z = v;
  for (std::size_t i = 0; i < 3; ++i) z = layer(z, p.encoder[i], i < 2);
  M r = z;
  for (std::size_t i = 0; i < 3; ++i) r = layer(r, p.decoder[i], i < 2);
  Graph<double> g;
  const auto out = sae_forward(g.constant(v), bind(g, p, false));
  EXPECT_LE((out.z.value() - z).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((out.v_res.value() - r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sae, LossesAreRowSquaredErrors) {
  Graph<double> g;
  const auto a = g.constant((M(2, 2) << 1, 2, 0, 0).finished());
  const auto b = g.constant((M(2, 2) << 1, 0, 3, 4).finished());
  EXPECT_EQ(attr_loss(a, b).value(), (M(2, 1) << 4, 25).finished());
  EXPECT_EQ(res_loss(a, a).value(), M::Zero(2, 1));
  EXPECT_THROW(attr_loss(a, g.constant(M::Zero(2, 3))), DimensionError);
}

TEST(Sae, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  auto p = SaeParams<double>::init(4, 5, 3, rng);
  for (auto& l : p.encoder) l.bias.value() = random_matrix(1, l.bias.value().cols(), rng, 0.5);
  for (auto& l : p.decoder) l.bias.value() = random_matrix(1, l.bias.value().cols(), rng, 0.5);
  const M v = random_matrix(3, 4, rng), zs = random_matrix(3, 3, rng);
  auto loss = [&](Graph<double>& g) {
    const auto vv = g.constant(v);
    const auto out = sae_forward(vv, bind(g, p, true));
    return mean(attr_loss(out.z, g.constant(zs))) + scale(mean(res_loss(vv, out.v_res)), 0.3);
  };
  Graph<double> g;
  g.backward(loss(g));
  p.for_each([&](const std::string& name, Tensor<double>& t) {
    const M analytic = t.grad();
    auto f = [&](const M& x) {
      const M keep = t.value();
      t.value() = x;
      Graph<double> h;
      const double out = loss(h).item();
      t.value() = keep;
      return out;
    };
    EXPECT_LE(max_relative_error(analytic, finite_difference(f, t.value())), 1e-5) << name;
  });
}

TEST(ZslPredict, NearestRowWithLowestIndexOnTies) {
  const M table = (M(3, 2) << 1, 0, 0, 1, 1, 0).finished();
  EXPECT_EQ(zsl_predict<double>((M(1, 2) << 0.9, 0.2).finished(), table), 0);
  EXPECT_EQ(zsl_predict<double>((M(1, 2) << 0.2, 0.9).finished(), table), 1);
  EXPECT_EQ(zsl_predict<double>((M(1, 2) << 0.5, 0.5).finished(), table), 0);
  EXPECT_THROW(zsl_predict<double>(M::Zero(1, 2), M::Zero(0, 2)), std::invalid_argument);
  EXPECT_THROW(zsl_predict<double>(M::Zero(1, 3), table), DimensionError);
}

}  // namespace
}  // namespace gzsl
