#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "test_support.hpp"

namespace gzsl {
namespace {

namespace fs = std::filesystem;
using M = Matrix<double>;

GeneratorSpec small_spec() {
  GeneratorSpec s;
  s.classes_seen = 5;
  s.classes_unseen = 3;
  s.train_per_class = 4;
  s.test_per_class = 2;
  s.sequence_length = 12;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gzsl_dataset_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

TEST(AttributeTable, Validation) {
  const std::vector<std::string> names = {"a", "b"};
  EXPECT_THROW(AttributeTable(names, {{"x", true, {1, 0}}, {"y", false, {1, 0}}}), DatasetError);
  EXPECT_THROW(AttributeTable(names, {{"x", true, {1, 0, 1}}}), DatasetError);
  EXPECT_THROW(AttributeTable(names, {{"x", true, {2, 0}}}), DatasetError);
  EXPECT_THROW(AttributeTable(names, {{"x", true, {1, 0}}, {"x", false, {0, 1}}}), DatasetError);
  EXPECT_THROW(AttributeTable({}, {}), DatasetError);
}

TEST(AttributeTable, SeenAndUnseenIndexing) {
  const AttributeTable t({"a", "b"}, {{"x", false, {1, 0}}, {"y", true, {0, 1}}, {"z", true, {1, 1}}});
  EXPECT_EQ(t.seen_labels(), (std::vector<int>{1, 2}));
  EXPECT_EQ(t.unseen_labels(), (std::vector<int>{0}));
  EXPECT_EQ(t.seen_index(2), 1);
  EXPECT_EQ(t.seen_index(0), -1);
  EXPECT_EQ(t.unseen_index(0), 0);
  EXPECT_EQ(t.find("z"), 2);
  EXPECT_FALSE(t.find("w"));
  EXPECT_EQ(t.seen_matrix(), (M(2, 2) << 0, 1, 1, 1).finished());
  EXPECT_FALSE(t.is_seen(7));
}

TEST(Generator, DefaultShapeAndCounts) {
  const Dataset d = generate_synthetic(1, GeneratorSpec{});
  EXPECT_EQ(d.train.size(), 800u);
  EXPECT_EQ(d.test.size(), 500u);
  EXPECT_EQ(d.attributes.seen_labels().size(), 16u);
  EXPECT_EQ(d.attributes.unseen_labels().size(), 9u);
  EXPECT_EQ(d.attributes.width(), 11);
  EXPECT_EQ(d.manifest.feature_names.size(), 36u);
  EXPECT_EQ(d.train.front().frames.rows(), 100);
  EXPECT_EQ(d.train.front().frames.cols(), 36);
  for (const auto& s : d.train) EXPECT_TRUE(d.attributes.is_seen(s.label));
}

TEST(Generator, AttributeRowsAreDistinctAndInformative) {
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const Dataset d = generate_synthetic(seed, GeneratorSpec{});
    const auto& cls = d.attributes.classes();
    for (std::size_t i = 0; i < cls.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        int h = 0;
        for (std::size_t k = 0; k < cls[i].attributes.size(); ++k) h += cls[i].attributes[k] != cls[j].attributes[k];
        EXPECT_GE(h, 2);
      }
    for (Index k = 0; k < 11; ++k) {
      const auto col = d.attributes.seen_matrix().col(k);
      EXPECT_GT(col.sum(), 0);
      EXPECT_LT(col.sum(), 16);
    }
  }
}

TEST(Generator, SameSeedSameData) {
  const Dataset a = generate_synthetic(5, small_spec());
  const Dataset b = generate_synthetic(5, small_spec());
  const Dataset c = generate_synthetic(6, small_spec());
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].frames, b.train[i].frames);
  EXPECT_NE(a.train[0].frames, c.train[0].frames);
}

TEST(Generator, DuplicateExplicitRowsAreRejected) {
  GeneratorSpec s = small_spec();
  s.classes_seen = 2;
  s.classes_unseen = 1;
  s.attribute_rows = {{1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}, {0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1}, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}};
  EXPECT_THROW(generate_synthetic(1, s), DatasetError);
  s.attribute_rows.pop_back();
  EXPECT_THROW(generate_synthetic(1, s), DatasetError);
}

TEST(Generator, ZeroNoiseSamplesOfAClassCoincide) {
  GeneratorSpec s = small_spec();
  s.noise = 0;
  const Dataset d = generate_synthetic(3, s);
  EXPECT_EQ(d.train[0].frames, d.train[1].frames);
  EXPECT_NE(d.train[0].frames, d.train[s.train_per_class].frames);
}

TEST(Generator, FingerAttributesAreVisibleInTheFrames) {
  // Tip height of a bent finger sits below that of a straight one.
  GeneratorSpec s = small_spec();
  s.noise = 0;
  s.classes_seen = 2;
  s.classes_unseen = 0;
  s.attribute_rows = {{0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}};
  const Dataset d = generate_synthetic(1, s);
  const Index index_tip_y = 6 + 1 * 6 + 3 + 1, palm_y = 4;
  const M& bent = d.train[0].frames;
  const M& straight = d.train[static_cast<std::size_t>(s.train_per_class)].frames;
  EXPECT_LT(bent(0, index_tip_y) - bent(0, palm_y), straight(0, index_tip_y) - straight(0, palm_y) - 0.2);
}

TEST(Normalization, TrainStatisticsAreStandardised) {
  const Dataset d = generate_synthetic(2, small_spec());
  const auto stats = fit_normalization(d.train, d.manifest.palm_offset);
  const auto norm = normalize(d.train, stats);
  const auto refit = fit_normalization(norm, -1);
  for (std::size_t k = 0; k < refit.mean.size(); ++k) {
    EXPECT_NEAR(refit.mean[k], 0.0, 1e-9);
    EXPECT_NEAR(refit.stddev[k], 1.0, 1e-6);
  }
}

TEST(Normalization, IsIdempotent) {
  const Dataset d = generate_synthetic(4, small_spec());
  const auto once = normalize(d.train, fit_normalization(d.train, d.manifest.palm_offset));
  const auto twice = normalize(once, fit_normalization(once, d.manifest.palm_offset));
  for (std::size_t i = 0; i < once.size(); ++i)
    EXPECT_LE((once[i].frames - twice[i].frames).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Normalization, PalmIsRelativeToFirstFrameAndConstantFeaturesAreFloored) {
  M frames(3, 4);
  frames << 1, 10, 20, 30,  //
      1, 11, 22, 33,        //
      1, 12, 24, 36;
  const std::vector<GestureSequence> seqs = {{"train", 0, 0, frames}};
  const auto stats = fit_normalization(seqs, 1);
  EXPECT_NEAR(stats.mean[1], 1.0, 1e-12);  // palm x: 0, 1, 2
  EXPECT_NEAR(stats.stddev[0], std::sqrt(kVarianceFloor), 1e-15);
  const auto n = normalize(seqs[0], stats);
  EXPECT_TRUE(n.frames.allFinite());
  EXPECT_EQ(n.frames.col(0), M::Zero(3, 1));
  EXPECT_THROW(normalize(GestureSequence{"train", 0, 0, M::Zero(2, 5)}, stats), DimensionError);
  EXPECT_THROW(fit_normalization(std::vector<GestureSequence>{}, 1), DatasetError);
}

TEST(Protocol, TrainViewHoldsSeenClassesOnly) {
  Dataset d = generate_synthetic(1, small_spec());
  d.train.push_back(d.test.back());  // an unseen-class sample
  const auto views = split_views(d);
  EXPECT_EQ(views.train.size(), d.train.size() - 1);
  EXPECT_EQ(views.test.size(), d.test.size());
  EXPECT_THROW(require_seen(d.train, d.attributes, "train"), ProtocolError);
  EXPECT_NO_THROW(require_seen(views.train.materialize(), d.attributes, "train"));
}

TEST(Files, RoundTripIsExact) {
  const fs::path dir = scratch("roundtrip");
  const Dataset d = generate_synthetic(7, small_spec());
  save_dataset(d, dir);
  const Dataset e = load_dataset(dir);
  ASSERT_EQ(e.train.size(), d.train.size());
  ASSERT_EQ(e.test.size(), d.test.size());
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    EXPECT_EQ(e.test[i].label, d.test[i].label);
    EXPECT_EQ(e.test[i].sample_id, d.test[i].sample_id);
    EXPECT_EQ(e.test[i].frames, d.test[i].frames);
  }
  EXPECT_EQ(e.attributes.classes().size(), d.attributes.classes().size());
  EXPECT_EQ(e.manifest.normalization->mean, d.manifest.normalization->mean);
  // Saving the loaded copy reproduces the files byte for byte.
  const fs::path again = scratch("roundtrip2");
  save_dataset(e, again);
  for (const char* f : {"manifest.json", "train.csv", "test.csv"}) EXPECT_EQ(slurp(dir / f), slurp(again / f)) << f;
  const std::string header = slurp(dir / "train.csv").substr(0, 30);
  EXPECT_EQ(header.rfind("split,class,sample_id,frame,f0", 0), 0u);
}

class CorruptFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = scratch("corrupt");
    save_dataset(generate_synthetic(8, small_spec()), dir);
    train = slurp(dir / "train.csv");
  }
  void replace_first(const std::string& from, const std::string& to) {
    const auto pos = train.find(from);
    ASSERT_NE(pos, std::string::npos);
    train.replace(pos, from.size(), to);
    spit(dir / "train.csv", train);
  }
  fs::path dir;
  std::string train;
};

TEST_F(CorruptFiles, UnknownClass) {
  replace_first("gesture_00", "gesture_77");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(CorruptFiles, UnseenClassInTrain) {
  std::string t = train;
  for (std::size_t pos; (pos = t.find(",gesture_00,")) != std::string::npos;) t.replace(pos, 12, ",gesture_07,");
  spit(dir / "train.csv", t);
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(CorruptFiles, NonFiniteValue) {
  const auto line_end = train.find('\n', train.find('\n') + 1);
  const auto last_comma = train.rfind(',', line_end);
  train.replace(last_comma + 1, line_end - last_comma - 1, "nan");
  spit(dir / "train.csv", train);
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(CorruptFiles, MissingColumn) {
  const auto line_end = train.find('\n', train.find('\n') + 1);
  const auto last_comma = train.rfind(',', line_end);
  train.erase(last_comma, line_end - last_comma);
  spit(dir / "train.csv", train);
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(CorruptFiles, MissingFrame) {
  const auto second = train.find('\n') + 1;
  const auto third = train.find('\n', second) + 1;
  train.erase(second, third - second);
  spit(dir / "train.csv", train);
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST_F(CorruptFiles, CountMismatchAndBadManifest) {
  std::string manifest = slurp(dir / "manifest.json");
  const auto pos = manifest.find("\"train\": 20");
  ASSERT_NE(pos, std::string::npos);
  manifest.replace(pos, 11, "\"train\": 21");
  spit(dir / "manifest.json", manifest);
  EXPECT_THROW(load_dataset(dir), DatasetError);
  spit(dir / "manifest.json", "{ not json");
  EXPECT_THROW(load_dataset(dir), DatasetError);
  fs::remove(dir / "manifest.json");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

}  // namespace
}  // namespace gzsl
