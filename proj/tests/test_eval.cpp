#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

namespace gzsl {
namespace {

using M = Matrix<double>;
using testing::random_sequences;
using testing::small_table;
using testing::tiny_model_config;

TEST(HarmonicMean, Values) {
  EXPECT_NEAR(harmonic_mean(0.8906, 0.5833), 0.7049, 5e-4);
  EXPECT_DOUBLE_EQ(harmonic_mean(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(0.4, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(harmonic_mean(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(0.3, 0.6), harmonic_mean(0.6, 0.3));
}

// Table: classes 0, 1 seen; 2, 3 unseen. Prototypes: one per seen class.
struct HandCache {
  AttributeTable table = small_table(2, 2);
  TestCache<double> cache;
  HandCache() {
    auto add = [&](int label, Index nearest, double dist, int zsl_unseen, int zsl_all) {
      cache.labels.push_back(label);
      cache.verdicts.push_back({nearest, nearest, dist, false});
      cache.zsl_unseen.push_back(zsl_unseen);
      cache.zsl_all.push_back(zsl_all);
    };
    add(0, 0, 0.5, 2, 0);  // seen, inside radius, right
    add(0, 1, 0.5, 3, 1);  // seen, inside radius, wrong class
    add(1, 1, 3.0, 2, 1);  // seen, rejected -> unseen guess (wrong)
    add(2, 0, 4.0, 2, 2);  // unseen, rejected, right
    add(3, 1, 0.2, 3, 0);  // unseen, accepted (wrong)
    add(3, 0, 1.0, 3, 3);  // unseen, on the radius: accepted (wrong)
  }
};

TEST(Score, TwoStageMetricsByHand) {
  HandCache h;
  const M radii = (M(2, 1) << 1.0, 1.0).finished();
  const GzslReport r = score(h.cache, h.table, radii, Routing::kTwoStage);
  EXPECT_DOUBLE_EQ(*r.acc_s, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.acc_u, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.h, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.ar, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.rr, 1.0 / 3.0);
  EXPECT_EQ(r.confusion(0, 0), 1);
  EXPECT_EQ(r.confusion(0, 1), 1);
  EXPECT_EQ(r.confusion(1, 2), 1);
  EXPECT_EQ(r.confusion(3, 0), 1);
  EXPECT_EQ(r.confusion(3, 1), 1);
  EXPECT_EQ(r.confusion.sum(), 6);
  EXPECT_EQ(r.accepted, (std::vector<std::int64_t>{2, 0, 0, 2}));
  EXPECT_EQ(r.counts, (std::vector<std::int64_t>{2, 1, 1, 2}));
}

TEST(Score, WiderRadiiAcceptMore) {
  HandCache h;
  double prev_ar = -1, prev_rr = 2;
  for (double th : {0.1, 0.5, 1.0, 3.0, 5.0}) {
    const GzslReport r = score(h.cache, h.table, M(M::Constant(2, 1, th)), Routing::kTwoStage);
    EXPECT_GE(*r.ar, prev_ar);
    EXPECT_LE(*r.rr, prev_rr);
    prev_ar = *r.ar;
    prev_rr = *r.rr;
  }
}

TEST(Score, SaeOnlyHasNoDetectorRates) {
  HandCache h;
  const GzslReport r = score(h.cache, h.table, M(M::Zero(2, 1)), Routing::kSaeOnly);
  EXPECT_DOUBLE_EQ(*r.acc_s, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.acc_u, 2.0 / 3.0);
  EXPECT_FALSE(r.ar);
  EXPECT_FALSE(r.rr);
}

TEST(Score, MissingPartitionLeavesMetricsEmpty) {
  HandCache h;
  TestCache<double> seen_only = h.cache;
  seen_only.labels.resize(3);
  seen_only.verdicts.resize(3);
  seen_only.zsl_unseen.resize(3);
  seen_only.zsl_all.resize(3);
  const GzslReport r = score(seen_only, h.table, M(M::Constant(2, 1, 1.0)), Routing::kTwoStage);
  EXPECT_TRUE(r.acc_s);
  EXPECT_FALSE(r.acc_u);
  EXPECT_FALSE(r.h);
  EXPECT_FALSE(r.rr);
  std::ostringstream os;
  write_report_row(os, "x", r);
  EXPECT_EQ(os.str(), "x,0.333333,,,0.666667,\n");
}

TEST(Reports, CsvLayouts) {
  HandCache h;
  const GzslReport r = score(h.cache, h.table, M(M::Constant(2, 1, 1.0)), Routing::kTwoStage);
  std::ostringstream report;
  write_report_header(report);
  write_report_row(report, "full", r);
  EXPECT_EQ(report.str(), "configuration,acc_s,acc_u,h,ar,rr\nfull,0.333333,0.333333,0.333333,0.666667,0.333333\n");
  std::ostringstream conf;
  write_confusion(conf, r, h.table);
  std::istringstream lines(conf.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(first, "true_class,seen,c0,c1,c2,c3,accepted,total");
  EXPECT_EQ(second, "c0,1,1,1,0,0,2,2");
  std::ostringstream beta;
  const std::vector<BetaRow> rows = {{0.5, 0.75, 0.25, {}}, {0.01, 1.0, 0.0, {}}};
  write_beta_table(beta, rows);
  EXPECT_EQ(beta.str(), "beta,ar,rr\n0.5,0.750000,0.250000\n0.01,1.000000,0.000000\n");
}

struct TinyWorld {
  AttributeTable table = small_table(3, 2);
  std::mt19937_64 rng{31};
  std::vector<GestureSequence> train = random_sequences({0, 1, 2, 0, 1, 2}, 5, 4, rng);
  std::vector<GestureSequence> test = random_sequences({0, 1, 2, 3, 4, 3}, 5, 4, rng, "test");
  Model<double> model = Model<double>::init(tiny_model_config(4, 3, 4), 3);
};

TEST(Evaluate, RequiresThresholds) {
  TinyWorld w;
  EXPECT_THROW(evaluate(w.model, w.test, w.table), ThresholdError);
  EXPECT_THROW(predict(w.model, w.test[0], w.table), ThresholdError);
}

TEST(Evaluate, AgreesWithPerSamplePrediction) {
  TinyWorld w;
  TrainConfig tc;
  tc.epochs = 2;
  train(w.model, w.train, w.table, tc);
  w.model.thresholds = fit_thresholds(w.model, w.train, w.table, tc);
  const GzslReport r = evaluate(w.model, w.test, w.table);
  Matrix<std::int64_t> expected = Matrix<std::int64_t>::Zero(5, 5);
  for (const auto& s : w.test) {
    const auto p = predict(w.model, s, w.table);
    expected(s.label, p.label) += 1;
    if (p.accepted) EXPECT_TRUE(w.table.is_seen(p.label));
    else EXPECT_FALSE(w.table.is_seen(p.label));
  }
  EXPECT_EQ(r.confusion, expected);
}

TEST(SweepBeta, OneRowPerBetaInOrder) {
  TinyWorld w;
  TrainConfig tc;
  tc.epochs = 1;
  train(w.model, w.train, w.table, tc);
  const std::vector<double> betas = {0.5, 0.05, 0.005};
  const auto rows = sweep_beta(w.model, w.train, w.test, w.table, betas, tc);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].beta, betas[i]);
    EXPECT_EQ(rows[i].ar, *rows[i].report.ar);
  }
  std::vector<GestureSequence> bad = w.train;
  bad.push_back(w.test[3]);
  EXPECT_THROW(sweep_beta(w.model, bad, w.test, w.table, betas, tc), ProtocolError);
}

TEST(Ablation, RowsComeInTableOrder) {
  TinyWorld w;
  TrainConfig tc;
  tc.epochs = 1;
  AblationOptions opt;
  opt.fixed_thresholds = {0.1, 1.0};
  const auto rows = ablate<double>(tiny_model_config(4, 3, 4), w.train, w.test, w.table, tc, opt);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].configuration, "a:blstm+sae");
  EXPECT_EQ(rows[1].configuration, "b:fixed_threshold=0.1");
  EXPECT_EQ(rows[2].configuration, "b:fixed_threshold=1");
  EXPECT_EQ(rows[3].configuration, "c:two_stage");
  EXPECT_EQ(rows[4].configuration, "d:end_to_end");
  EXPECT_FALSE(rows[0].report.ar);
  EXPECT_TRUE(rows[4].report.ar);
  std::ostringstream os;
  write_ablation_table(os, rows);
  EXPECT_EQ(os.str().rfind("configuration,acc_s,acc_u,h,ar,rr,seconds_per_sample\na:blstm+sae,", 0), 0u);
}

}  // namespace
}  // namespace gzsl
