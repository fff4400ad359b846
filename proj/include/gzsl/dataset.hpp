#ifndef GZSL_DATASET_HPP
#define GZSL_DATASET_HPP

// Gesture sequences, the class attribute table, the on-disk format
// (manifest.json + one CSV table per split), normalization, and the
// synthetic generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gzsl/autodiff.hpp"

namespace gzsl {

inline constexpr int kDatasetFormatVersion = 1;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an unseen-class sample reaches a training-only code path.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct GestureSequence {
  std::string split;  // "train" or "test"
  int label = 0;      // global class id (row of the attribute table)
  int sample_id = 0;
  Matrix<double> frames;  // [T x d_in]
};

struct ClassInfo {
  std::string name;
  bool seen = true;
  std::vector<int> attributes;
};

/// Binary semantic vectors of every class, seen and unseen.
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(std::vector<std::string> attribute_names, std::vector<ClassInfo> classes)
      : names_(std::move(attribute_names)), classes_(std::move(classes)) {
    validate();
    index();
  }

  Index width() const { return static_cast<Index>(names_.size()); }
  Index class_count() const { return static_cast<Index>(classes_.size()); }
  const std::vector<std::string>& attribute_names() const { return names_; }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const ClassInfo& info(int label) const { return classes_.at(static_cast<std::size_t>(label)); }

  const std::vector<int>& seen_labels() const { return seen_; }
  const std::vector<int>& unseen_labels() const { return unseen_; }
  bool is_seen(int label) const { return label >= 0 && label < class_count() && info(label).seen; }

  /// Position of a seen class among the seen classes; -1 when unseen.
  Index seen_index(int label) const { return seen_pos_.at(static_cast<std::size_t>(label)); }
  Index unseen_index(int label) const { return unseen_pos_.at(static_cast<std::size_t>(label)); }

  std::optional<int> find(std::string_view name) const {
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (classes_[i].name == name) return static_cast<int>(i);
    return std::nullopt;
  }

  template <typename T = double>
  Matrix<T> rows(std::span<const int> labels) const {
    Matrix<T> m(static_cast<Index>(labels.size()), width());
    for (std::size_t r = 0; r < labels.size(); ++r)
      for (Index k = 0; k < width(); ++k) m(static_cast<Index>(r), k) = static_cast<T>(info(labels[r]).attributes[k]);
    return m;
  }

  template <typename T = double>
  Matrix<T> seen_matrix() const { return rows<T>(seen_); }
  template <typename T = double>
  Matrix<T> unseen_matrix() const { return rows<T>(unseen_); }
  template <typename T = double>
  Matrix<T> all_matrix() const {
    std::vector<int> all(classes_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return rows<T>(all);
  }

 private:
  void validate() const {
    if (names_.empty()) throw DatasetError("attribute table has no attributes");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      const auto& c = classes_[i];
      if (c.attributes.size() != names_.size())
        throw DatasetError("class '" + c.name + "' has " + std::to_string(c.attributes.size()) +
                           " attributes, declared width is " + std::to_string(names_.size()));
      for (int a : c.attributes)
        if (a != 0 && a != 1) throw DatasetError("class '" + c.name + "' has a non-binary attribute");
      for (std::size_t j = 0; j < i; ++j) {
        if (classes_[j].name == c.name) throw DatasetError("duplicate class name '" + c.name + "'");
        if (classes_[j].attributes == c.attributes)
          throw DatasetError("classes '" + classes_[j].name + "' and '" + c.name + "' share an attribute row");
      }
    }
  }

  void index() {
    seen_pos_.assign(classes_.size(), -1);
    unseen_pos_.assign(classes_.size(), -1);
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i].seen) {
        seen_pos_[i] = static_cast<Index>(seen_.size());
        seen_.push_back(static_cast<int>(i));
      } else {
        unseen_pos_[i] = static_cast<Index>(unseen_.size());
        unseen_.push_back(static_cast<int>(i));
      }
    }
  }

  std::vector<std::string> names_;
  std::vector<ClassInfo> classes_;
  std::vector<int> seen_, unseen_;
  std::vector<Index> seen_pos_, unseen_pos_;
};

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  Index palm_offset = -1;  // first of three palm-center columns, -1 if absent
};

struct DatasetManifest {
  int version = kDatasetFormatVersion;
  Index sequence_length = 0;
  Index frame_width = 0;
  Index palm_offset = -1;
  std::vector<std::string> feature_names;
  std::map<std::string, Index> counts;
  std::optional<NormalizationStats> normalization;
  nlohmann::json generator;  // echo of the generator settings, if any
};

struct Dataset {
  DatasetManifest manifest;
  AttributeTable attributes;
  std::vector<GestureSequence> train;
  std::vector<GestureSequence> test;
};

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kVarianceFloor = 1e-8;

namespace detail {
inline void palm_relative(Matrix<double>& frames, Index palm_offset) {
  if (palm_offset < 0 || frames.rows() == 0) return;
  const Eigen::RowVector3d origin = frames.block(0, palm_offset, 1, 3);
  for (Index t = 0; t < frames.rows(); ++t) frames.block(t, palm_offset, 1, 3) -= origin;
}
}  // namespace detail

/// Per-feature mean and standard deviation over every frame of the given
/// (training) sequences, after re-expressing palm positions relative to the
/// first frame.
inline NormalizationStats fit_normalization(std::span<const GestureSequence> train, Index palm_offset) {
  if (train.empty()) throw DatasetError("cannot fit normalization on an empty split");
  const Index width = train.front().frames.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(width);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(width);
  double n = 0;
  for (const auto& s : train) {
    Matrix<double> f = s.frames;
    detail::palm_relative(f, palm_offset);
    sum += f.colwise().sum().transpose();
    n += static_cast<double>(f.rows());
  }
  const Eigen::VectorXd mean = sum / n;
  for (const auto& s : train) {
    Matrix<double> f = s.frames;
    detail::palm_relative(f, palm_offset);
    sq += (f.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  NormalizationStats st;
  st.palm_offset = palm_offset;
  st.mean.assign(mean.data(), mean.data() + width);
  st.stddev.resize(static_cast<std::size_t>(width));
  for (Index k = 0; k < width; ++k) st.stddev[static_cast<std::size_t>(k)] = std::sqrt(std::max(sq(k) / n, kVarianceFloor));
  return st;
}

inline GestureSequence normalize(const GestureSequence& s, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(s.frames.cols()) != stats.mean.size())
    throw DimensionError("normalize: frame width " + std::to_string(s.frames.cols()) + " but statistics cover " +
                         std::to_string(stats.mean.size()) + " features");
  GestureSequence out = s;
  detail::palm_relative(out.frames, stats.palm_offset);
  const Eigen::Map<const Eigen::RowVectorXd> mu(stats.mean.data(), static_cast<Index>(stats.mean.size()));
  const Eigen::Map<const Eigen::RowVectorXd> sd(stats.stddev.data(), static_cast<Index>(stats.stddev.size()));
  out.frames = ((out.frames.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  return out;
}

inline std::vector<GestureSequence> normalize(std::span<const GestureSequence> seqs, const NormalizationStats& stats) {
  std::vector<GestureSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(normalize(s, stats));
  return out;
}

// ---------------------------------------------------------------------------
// GZSL views

/// Training view: seen-class sequences only.
class TrainView {
 public:
  TrainView(std::span<const GestureSequence> train, const AttributeTable& table) {
    for (const auto& s : train)
      if (table.is_seen(s.label)) samples_.push_back(&s);
  }
  std::size_t size() const { return samples_.size(); }
  const GestureSequence& operator[](std::size_t i) const { return *samples_[i]; }
  std::vector<GestureSequence> materialize() const {
    std::vector<GestureSequence> v;
    for (auto* s : samples_) v.push_back(*s);
    return v;
  }
  const GestureSequence* find(int label, int sample_id) const {
    for (auto* s : samples_)
      if (s->label == label && s->sample_id == sample_id) return s;
    return nullptr;
  }

 private:
  std::vector<const GestureSequence*> samples_;
};

/// Test view: both partitions.
class TestView {
 public:
  explicit TestView(std::span<const GestureSequence> test) : samples_(test) {}
  std::span<const GestureSequence> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

 private:
  std::span<const GestureSequence> samples_;
};

struct SplitViews {
  TrainView train;
  TestView test;
};

inline SplitViews split_views(const Dataset& d) { return {TrainView(d.train, d.attributes), TestView(d.test)}; }

/// Throws ProtocolError if any sequence belongs to an unseen class.
inline void require_seen(std::span<const GestureSequence> samples, const AttributeTable& table, const char* where) {
  for (const auto& s : samples)
    if (!table.is_seen(s.label))
      throw ProtocolError(std::string(where) + ": sample " + std::to_string(s.sample_id) + " of class '" +
                          (s.label >= 0 && s.label < table.class_count() ? table.info(s.label).name
                                                                         : std::to_string(s.label)) +
                          "' is not a seen class; only seen-class data may be used for training");
}

// ---------------------------------------------------------------------------
// File format

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DatasetError("cannot format value");
  return std::string(buf, p);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DatasetError(where + ": cannot parse number '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw DatasetError(where + ": non-finite value");
  return v;
}

inline int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DatasetError(where + ": cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json stats_to_json(const NormalizationStats& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"palm_offset", s.palm_offset}};
}

inline NormalizationStats stats_from_json(const nlohmann::json& j) {
  NormalizationStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("std").get<std::vector<double>>();
  s.palm_offset = j.at("palm_offset").get<Index>();
  if (s.mean.size() != s.stddev.size()) throw DatasetError("normalization mean/std lengths differ");
  return s;
}

inline void write_split(const std::filesystem::path& path, const std::string& split,
                        std::span<const GestureSequence> seqs, const AttributeTable& table, Index width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  std::string line = "split,class,sample_id,frame";
  for (Index k = 0; k < width; ++k) line += ",f" + std::to_string(k);
  out << line << '\n';
  for (const auto& s : seqs) {
    for (Index t = 0; t < s.frames.rows(); ++t) {
      line = split;
      line += ',';
      line += table.info(s.label).name;
      line += ',' + std::to_string(s.sample_id) + ',' + std::to_string(t);
      for (Index k = 0; k < s.frames.cols(); ++k) {
        line += ',';
        line += format_double(s.frames(t, k));
      }
      out << line << '\n';
    }
  }
}

inline std::vector<GestureSequence> read_split(const std::filesystem::path& path, const std::string& split,
                                               const AttributeTable& table, const DatasetManifest& m) {
  const std::string text = read_file(path);
  std::vector<GestureSequence> seqs;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  auto flush = [&]() {
    if (seqs.empty()) return;
    auto& s = seqs.back();
    if (static_cast<Index>(rows.size()) != m.sequence_length)
      throw DatasetError(path.string() + ": sample " + std::to_string(s.sample_id) + " has " +
                         std::to_string(rows.size()) + " frames, expected " + std::to_string(m.sequence_length));
    s.frames.resize(m.sequence_length, m.frame_width);
    for (Index t = 0; t < m.sequence_length; ++t)
      for (Index k = 0; k < m.frame_width; ++k) s.frames(t, k) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    rows.clear();
  };
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line_no == 1) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    const auto cols = split_csv(line);
    if (static_cast<Index>(cols.size()) != 4 + m.frame_width)
      throw DatasetError(where + ": expected " + std::to_string(4 + m.frame_width) + " columns, got " +
                         std::to_string(cols.size()));
    if (cols[0] != split) throw DatasetError(where + ": row tagged '" + std::string(cols[0]) + "' in the " + split + " table");
    const auto label = table.find(cols[1]);
    if (!label) throw DatasetError(where + ": unknown class '" + std::string(cols[1]) + "'");
    const int sample = parse_int(cols[2], where);
    const int frame = parse_int(cols[3], where);
    if (frame == 0) {
      flush();
      seqs.push_back({split, *label, sample, {}});
    } else if (seqs.empty() || seqs.back().sample_id != sample || seqs.back().label != *label ||
               frame != static_cast<int>(rows.size())) {
      throw DatasetError(where + ": frames of a sample must be contiguous and start at 0");
    }
    std::vector<double> values(static_cast<std::size_t>(m.frame_width));
    for (Index k = 0; k < m.frame_width; ++k) values[static_cast<std::size_t>(k)] = parse_double(cols[4 + k], where);
    rows.push_back(std::move(values));
  }
  flush();
  return seqs;
}

}  // namespace detail

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& m = d.manifest;
  nlohmann::json j;
  j["format"] = "gzsl-gesture-dataset";
  j["version"] = m.version;
  j["sequence_length"] = m.sequence_length;
  j["frame_width"] = m.frame_width;
  j["palm_offset"] = m.palm_offset;
  j["feature_names"] = m.feature_names;
  j["attribute_names"] = d.attributes.attribute_names();
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : d.attributes.classes())
    classes.push_back({{"name", c.name}, {"seen", c.seen}, {"attributes", c.attributes}});
  j["classes"] = classes;
  j["counts"] = {{"train", d.train.size()}, {"test", d.test.size()}};
  j["normalization"] = m.normalization ? detail::stats_to_json(*m.normalization) : nlohmann::json(nullptr);
  if (!m.generator.is_null()) j["generator"] = m.generator;
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw DatasetError("cannot write " + (dir / "manifest.json").string());
    out << j.dump(2) << '\n';
  }
  detail::write_split(dir / "train.csv", "train", d.train, d.attributes, m.frame_width);
  detail::write_split(dir / "test.csv", "test", d.test, d.attributes, m.frame_width);
}

/// Loads and validates a dataset directory.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("manifest.json: " + std::string(e.what()));
  }
  Dataset d;
  auto& m = d.manifest;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kDatasetFormatVersion)
      throw DatasetError("manifest.json: unsupported version " + std::to_string(m.version));
    m.sequence_length = j.at("sequence_length").get<Index>();
    m.frame_width = j.at("frame_width").get<Index>();
    m.palm_offset = j.value("palm_offset", Index{-1});
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    if (m.sequence_length < 1 || m.frame_width < 1) throw DatasetError("manifest.json: sequence length and frame width must be positive");
    if (m.palm_offset + 3 > m.frame_width) throw DatasetError("manifest.json: palm_offset outside the frame");
    std::vector<ClassInfo> classes;
    for (const auto& c : j.at("classes")) {
      ClassInfo info{c.at("name").get<std::string>(), c.at("seen").get<bool>(), c.at("attributes").get<std::vector<int>>()};
      classes.push_back(std::move(info));
    }
    d.attributes = AttributeTable(j.at("attribute_names").get<std::vector<std::string>>(), std::move(classes));
    for (const auto& [k, v] : j.at("counts").items()) m.counts[k] = v.get<Index>();
    if (j.contains("normalization") && !j["normalization"].is_null())
      m.normalization = detail::stats_from_json(j["normalization"]);
    if (j.contains("generator")) m.generator = j["generator"];
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("manifest.json: " + std::string(e.what()));
  }
  d.train = detail::read_split(dir / "train.csv", "train", d.attributes, m);
  d.test = detail::read_split(dir / "test.csv", "test", d.attributes, m);
  for (const auto& [split, seqs] : {std::pair{"train", &d.train}, std::pair{"test", &d.test}}) {
    const auto it = m.counts.find(split);
    const Index declared = it == m.counts.end() ? -1 : it->second;
    if (declared != static_cast<Index>(seqs->size()))
      throw DatasetError(std::string("manifest declares ") + std::to_string(declared) + " " + split +
                         " sequences but the table holds " + std::to_string(seqs->size()));
  }
  for (const auto& s : d.train)
    if (!d.attributes.is_seen(s.label))
      throw DatasetError("train.csv: sample " + std::to_string(s.sample_id) + " belongs to unseen class '" +
                         d.attributes.info(s.label).name + "'");
  return d;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct GeneratorSpec {
  int classes_seen = 16;
  int classes_unseen = 9;
  int train_per_class = 50;
  int test_per_class = 20;
  int sequence_length = 100;
  double noise = 0.1;
  /// Optional explicit attribute rows (seen classes first); generated when empty.
  std::vector<std::vector<int>> attribute_rows;
};

inline const std::vector<std::string>& synthetic_attribute_names() {
  static const std::vector<std::string> names = {
      "move_horizontal", "move_vertical", "move_depth",  "circular",  "repetitive", "wrist_rotation",
      "thumb_bent",      "index_bent",    "middle_bent", "ring_bent", "pinky_bent"};
  return names;
}

inline std::vector<std::string> synthetic_feature_names() {
  std::vector<std::string> names = {"dir_x", "dir_y", "dir_z", "palm_x", "palm_y", "palm_z"};
  const char* fingers[] = {"thumb", "index", "middle", "ring", "pinky"};
  for (const char* f : fingers)
    for (const char* joint : {"knuckle", "tip"})
      for (const char* axis : {"x", "y", "z"}) names.push_back(std::string(f) + "_" + joint + "_" + axis);
  return names;
}

namespace detail {

inline int hamming(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

/// Distinct attribute rows at pairwise Hamming distance >= 2, with every
/// attribute both present and absent among the seen rows.
inline std::vector<std::vector<int>> make_attribute_rows(int seen, int unseen, std::mt19937_64& rng) {
  const std::size_t width = synthetic_attribute_names().size();
  std::bernoulli_distribution bit(0.45);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::vector<int>> rows;
    int draws = 0;
    while (static_cast<int>(rows.size()) < seen + unseen && draws < 100000) {
      ++draws;
      std::vector<int> r(width);
      for (auto& v : r) v = bit(rng) ? 1 : 0;
      if (std::count(r.begin(), r.end(), 1) == 0) continue;
      bool ok = true;
      for (const auto& o : rows) ok = ok && hamming(o, r) >= 2;
      if (ok) rows.push_back(std::move(r));
    }
    if (static_cast<int>(rows.size()) < seen + unseen) break;
    bool covered = true;
    for (std::size_t k = 0; k < width; ++k) {
      int on = 0;
      for (int c = 0; c < seen; ++c) on += rows[static_cast<std::size_t>(c)][k];
      covered = covered && on > 0 && on < seen;
    }
    if (covered) return rows;
  }
  throw DatasetError("cannot construct " + std::to_string(seen + unseen) + " distinct attribute rows");
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

struct ClassShape {
  std::vector<double> attributes;
  // Class-specific low-frequency wiggle: 3 coordinates x 3 components.
  double amp[3][3], freq[3][3], phase[3][3];
  double wrist_amp, wrist_freq, wrist_phase;
};

inline ClassShape make_class_shape(const std::vector<int>& attributes, std::uint64_t seed) {
  // Keyed to the attribute row so the wiggle is a property of the class.
  std::uint64_t key = seed * 0x9E3779B97F4A7C15ULL;
  for (int a : attributes) key = key * 31 + static_cast<std::uint64_t>(a + 1);
  std::mt19937_64 rng(key);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClassShape s;
  s.attributes.assign(attributes.begin(), attributes.end());
  for (int d = 0; d < 3; ++d)
    for (int q = 0; q < 3; ++q) {
      s.amp[d][q] = 0.04 + 0.06 * u(rng);
      s.freq[d][q] = 0.5 + 1.5 * u(rng);
      s.phase[d][q] = 2.0 * std::numbers::pi * u(rng);
    }
  s.wrist_amp = 0.1 * u(rng);
  s.wrist_freq = 0.5 + u(rng);
  s.wrist_phase = 2.0 * std::numbers::pi * u(rng);
  return s;
}

struct SampleJitter {
  double amplitude[6];  // per movement/rotation attribute
  double warp;          // time-warp strength
  double offset[3];     // global translation
};

inline Matrix<double> render(const ClassShape& cs, const SampleJitter& jit, int length, double noise,
                             std::mt19937_64& rng) {
  constexpr double kPi = std::numbers::pi;
  const auto& a = cs.attributes;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix<double> f(length, 36);
  for (int k = 0; k < length; ++k) {
    const double t0 = length > 1 ? double(k) / double(length - 1) : 0.0;
    const double t = std::clamp(t0 + jit.warp * std::sin(kPi * t0), 0.0, 1.0);
    const double s = smoothstep(t);
    double palm[3] = {0, 0, 0};
    palm[0] += a[0] * jit.amplitude[0] * (s - 0.5);
    palm[1] += a[1] * jit.amplitude[1] * (s - 0.5);
    palm[2] += a[2] * jit.amplitude[2] * (s - 0.5);
    palm[0] += a[3] * jit.amplitude[3] * 0.5 * (std::cos(2 * kPi * t) - 1.0);
    palm[1] += a[3] * jit.amplitude[3] * 0.5 * std::sin(2 * kPi * t);
    palm[0] += a[4] * jit.amplitude[4] * 0.25 * std::sin(6 * kPi * t);
    palm[2] += a[4] * jit.amplitude[4] * 0.15 * std::sin(6 * kPi * t);
    for (int d = 0; d < 3; ++d) {
      for (int q = 0; q < 3; ++q) palm[d] += cs.amp[d][q] * std::sin(2 * kPi * cs.freq[d][q] * t + cs.phase[d][q]);
      palm[d] += jit.offset[d];
    }
    const double angle = a[5] * jit.amplitude[5] * (kPi / 2) * s +
                         cs.wrist_amp * std::sin(2 * kPi * cs.wrist_freq * t + cs.wrist_phase);
    const double ca = std::cos(angle), sa = std::sin(angle);
    auto rotate = [&](double x, double y, double z, double* out) {
      out[0] = ca * x + sa * z;
      out[1] = y;
      out[2] = -sa * x + ca * z;
    };
    double dir[3];
    rotate(0.0, 0.0, -1.0, dir);
    int col = 0;
    for (double v : dir) f(k, col++) = v;
    for (double v : palm) f(k, col++) = v;
    // Finger geometry: knuckle and tip offsets; a bent finger curls its tip down and back.
    for (int finger = 0; finger < 5; ++finger) {
      const bool bent = a[static_cast<std::size_t>(6 + finger)] != 0;
      const double x = finger == 0 ? -0.35 : (finger - 2.5) * 0.2;
      const double knuckle[3] = {x, bent ? -0.06 : 0.0, finger == 0 ? -0.15 : -0.3};
      const double tip[3] = {finger == 0 ? (bent ? -0.25 : -0.5) : x, bent ? -0.3 : 0.0,
                             finger == 0 ? (bent ? -0.2 : -0.35) : (bent ? -0.3 : -0.65)};
      for (const double* off : {knuckle, tip}) {
        double r[3];
        rotate(off[0], off[1], off[2], r);
        for (int d = 0; d < 3; ++d) f(k, col++) = palm[d] + r[d];
      }
    }
  }
  if (noise > 0)
    for (Index i = 0; i < f.size(); ++i) f.data()[i] += 0.5 * noise * gauss(rng);
  // Four decimals keeps the text tables compact and round-trip exact.
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = std::round(f.data()[i] * 1e4) / 1e4;
  return f;
}

}  // namespace detail

/// Deterministic synthetic stand-in for a recorded gesture dataset. Movement
/// attributes shape the palm trajectory and wrist rotation; finger attributes
/// set static joint offsets, so attributes are recoverable from the frames.
inline Dataset generate_synthetic(std::uint64_t seed, const GeneratorSpec& spec) {
  if (spec.classes_seen < 1 || spec.classes_unseen < 0 || spec.train_per_class < 1 || spec.test_per_class < 0 ||
      spec.sequence_length < 1 || spec.noise < 0)
    throw DatasetError("invalid generator settings");
  std::mt19937_64 rng(seed);
  const int total = spec.classes_seen + spec.classes_unseen;
  std::vector<std::vector<int>> rows = spec.attribute_rows;
  if (rows.empty()) {
    rows = detail::make_attribute_rows(spec.classes_seen, spec.classes_unseen, rng);
  } else if (static_cast<int>(rows.size()) != total) {
    throw DatasetError("explicit attribute table has " + std::to_string(rows.size()) + " rows for " +
                       std::to_string(total) + " classes");
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (rows[i] == rows[j])
        throw DatasetError("duplicate attribute rows requested for classes " + std::to_string(j) + " and " +
                           std::to_string(i));

  std::vector<ClassInfo> classes;
  for (int c = 0; c < total; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "gesture_%02d", c);
    classes.push_back({name, c < spec.classes_seen, rows[static_cast<std::size_t>(c)]});
  }
  Dataset d;
  d.attributes = AttributeTable(synthetic_attribute_names(), std::move(classes));

  std::vector<detail::ClassShape> shapes;
  for (int c = 0; c < total; ++c) shapes.push_back(detail::make_class_shape(rows[static_cast<std::size_t>(c)], seed));

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto jitter = [&]() {
    detail::SampleJitter j{};
    for (double& a : j.amplitude) a = 1.0 + spec.noise * gauss(rng);
    j.warp = 0.3 * spec.noise * gauss(rng);
    for (double& o : j.offset) o = spec.noise * gauss(rng);
    return j;
  };
  int next_id = 0;
  for (int c = 0; c < spec.classes_seen; ++c)
    for (int n = 0; n < spec.train_per_class; ++n) {
      const auto jit = jitter();
      d.train.push_back({"train", c, next_id++,
                         detail::render(shapes[static_cast<std::size_t>(c)], jit, spec.sequence_length, spec.noise, rng)});
    }
  for (int c = 0; c < total; ++c)
    for (int n = 0; n < spec.test_per_class; ++n) {
      const auto jit = jitter();
      d.test.push_back({"test", c, next_id++,
                        detail::render(shapes[static_cast<std::size_t>(c)], jit, spec.sequence_length, spec.noise, rng)});
    }

  auto& m = d.manifest;
  m.sequence_length = spec.sequence_length;
  m.frame_width = 36;
  m.palm_offset = 3;
  m.feature_names = synthetic_feature_names();
  m.counts = {{"train", static_cast<Index>(d.train.size())}, {"test", static_cast<Index>(d.test.size())}};
  m.normalization = fit_normalization(d.train, m.palm_offset);
  m.generator = {{"seed", seed},
                 {"classes_seen", spec.classes_seen},
                 {"classes_unseen", spec.classes_unseen},
                 {"train_per_class", spec.train_per_class},
                 {"test_per_class", spec.test_per_class},
                 {"sequence_length", spec.sequence_length},
                 {"noise", spec.noise}};
  return d;
}

}  // namespace gzsl

#endif  // GZSL_DATASET_HPP
