#ifndef GZSL_EVAL_HPP
#define GZSL_EVAL_HPP

// Two-stage GZSL prediction, metrics, and the ablation / beta-sweep harness.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gzsl/dataset.hpp"
#include "gzsl/model.hpp"
#include "gzsl/prototype.hpp"
#include "gzsl/sae.hpp"
#include "gzsl/trainer.hpp"

namespace gzsl {

/// 2ab/(a+b); 0 when both are 0.
inline double harmonic_mean(double acc_s, double acc_u) {
  const double s = acc_s + acc_u;
  return s > 0 ? 2.0 * acc_s * acc_u / s : 0.0;
}

struct GzslReport {
  std::optional<double> acc_s, acc_u, h, ar, rr;
  Matrix<std::int64_t> confusion;      // [true class x predicted class], global ids
  std::vector<std::int64_t> accepted;  // detector acceptances per true class
  std::vector<std::int64_t> counts;    // test samples per true class
  double seconds_per_sample = 0;
};

enum class Routing {
  kTwoStage,  // detector, then SAE over unseen rows for rejected samples
  kSaeOnly,   // every sample to the SAE over all attribute rows
};

/// Per-sample quantities that do not depend on the thresholds.
template <typename T>
struct TestCache {
  std::vector<int> labels;
  std::vector<DetectorVerdict<T>> verdicts;
  std::vector<int> zsl_unseen;  // global id of the nearest unseen attribute row
  std::vector<int> zsl_all;     // global id of the nearest attribute row overall
  double seconds_per_sample = 0;
};

template <typename T>
TestCache<T> build_cache(Model<T>& model, std::span<const GestureSequence> seqs, const AttributeTable& table) {
  TestCache<T> c;
  const auto t0 = std::chrono::steady_clock::now();
  const Inference<T> inf = infer(model, seqs);
  const Matrix<T> unseen = table.unseen_matrix<T>();
  const Matrix<T> all = table.all_matrix<T>();
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Index r = static_cast<Index>(i);
    c.labels.push_back(seqs[i].label);
    c.verdicts.push_back(inf.verdicts[i]);
    c.zsl_unseen.push_back(unseen.rows() ? table.unseen_labels()[static_cast<std::size_t>(zsl_predict<T>(inf.z.row(r), unseen))] : -1);
    c.zsl_all.push_back(static_cast<int>(zsl_predict<T>(inf.z.row(r), all)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.seconds_per_sample = seqs.empty() ? 0.0 : secs / static_cast<double>(seqs.size());
  return c;
}

/// Final label of one cached sample under the given thresholds.
template <typename T>
int route(const TestCache<T>& c, std::size_t i, const Matrix<T>& radii, const AttributeTable& table, Routing routing,
          bool* accepted = nullptr) {
  if (routing == Routing::kSaeOnly) {
    if (accepted) *accepted = false;
    return c.zsl_all[i];
  }
  const auto& v = c.verdicts[i];
  const bool ok = v.min_distance <= radii.data()[v.nearest_prototype];
  if (accepted) *accepted = ok;
  return ok ? table.seen_labels()[static_cast<std::size_t>(v.nearest_class)] : c.zsl_unseen[i];
}

template <typename T>
GzslReport score(const TestCache<T>& c, const AttributeTable& table, const Matrix<T>& radii, Routing routing) {
  const Index classes = table.class_count();
  GzslReport r;
  r.confusion = Matrix<std::int64_t>::Zero(classes, classes);
  r.accepted.assign(static_cast<std::size_t>(classes), 0);
  r.counts.assign(static_cast<std::size_t>(classes), 0);
  std::int64_t seen_n = 0, seen_ok = 0, seen_acc = 0, unseen_n = 0, unseen_ok = 0, unseen_rej = 0;
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    bool accepted = false;
    const int pred = route(c, i, radii, table, routing, &accepted);
    const int truth = c.labels[i];
    r.confusion(truth, pred) += 1;
    r.counts[static_cast<std::size_t>(truth)] += 1;
    r.accepted[static_cast<std::size_t>(truth)] += accepted;
    if (table.is_seen(truth)) {
      ++seen_n;
      seen_ok += pred == truth;
      seen_acc += accepted;
    } else {
      ++unseen_n;
      unseen_ok += pred == truth;
      unseen_rej += !accepted;
    }
  }
  if (seen_n) r.acc_s = double(seen_ok) / double(seen_n);
  if (unseen_n) r.acc_u = double(unseen_ok) / double(unseen_n);
  if (r.acc_s && r.acc_u) r.h = harmonic_mean(*r.acc_s, *r.acc_u);
  if (routing == Routing::kTwoStage) {
    if (seen_n) r.ar = double(seen_acc) / double(seen_n);
    if (unseen_n) r.rr = double(unseen_rej) / double(unseen_n);
  }
  r.seconds_per_sample = c.seconds_per_sample;
  return r;
}

template <typename T>
struct Prediction {
  int label = -1;  // global class id
  bool accepted = false;
  DetectorVerdict<T> verdict;
};

/// Encode, project, detect; rejected samples are labelled by the SAE among unseen classes.
template <typename T>
Prediction<T> predict(Model<T>& model, const GestureSequence& x, const AttributeTable& table) {
  if (!model.thresholds) throw ThresholdError("predict: model has no fitted thresholds");
  const Inference<T> inf = infer(model, std::span<const GestureSequence>(&x, 1));
  Prediction<T> p;
  p.verdict = detect<T>(inf.projected.row(0), model.bank, model.thresholds);
  p.accepted = p.verdict.accepted;
  if (p.accepted) {
    p.label = table.seen_labels()[static_cast<std::size_t>(p.verdict.nearest_class)];
  } else {
    const Matrix<T> unseen = table.unseen_matrix<T>();
    p.label = table.unseen_labels()[static_cast<std::size_t>(zsl_predict<T>(inf.z.row(0), unseen))];
  }
  return p;
}

template <typename T>
GzslReport evaluate(Model<T>& model, std::span<const GestureSequence> test, const AttributeTable& table) {
  if (!model.thresholds) throw ThresholdError("evaluate: model has no fitted thresholds");
  const TestCache<T> c = build_cache(model, test, table);
  return score(c, table, model.thresholds->radii, Routing::kTwoStage);
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fraction_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline void write_report_header(std::ostream& os) { os << "configuration,acc_s,acc_u,h,ar,rr\n"; }

inline void write_report_row(std::ostream& os, const std::string& name, const GzslReport& r) {
  os << name << ',' << fraction_cell(r.acc_s) << ',' << fraction_cell(r.acc_u) << ',' << fraction_cell(r.h) << ','
     << fraction_cell(r.ar) << ',' << fraction_cell(r.rr) << '\n';
}

/// One row per true class: predicted-class counts, then acceptances and total.
inline void write_confusion(std::ostream& os, const GzslReport& r, const AttributeTable& table) {
  os << "true_class,seen";
  for (const auto& c : table.classes()) os << ',' << c.name;
  os << ",accepted,total\n";
  for (Index i = 0; i < table.class_count(); ++i) {
    os << table.info(static_cast<int>(i)).name << ',' << (table.info(static_cast<int>(i)).seen ? 1 : 0);
    for (Index j = 0; j < table.class_count(); ++j) os << ',' << r.confusion(i, j);
    os << ',' << r.accepted[static_cast<std::size_t>(i)] << ',' << r.counts[static_cast<std::size_t>(i)] << '\n';
  }
}

inline void write_summary(std::ostream& os, const std::string& name, const GzslReport& r) {
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *v);
    return std::string(buf);
  };
  os << name << ": Acc_s " << pct(r.acc_s) << "  Acc_u " << pct(r.acc_u) << "  H " << pct(r.h) << "  AR "
     << pct(r.ar) << "  RR " << pct(r.rr) << "  (" << r.seconds_per_sample * 1e3 << " ms/sample)\n";
}

// ---------------------------------------------------------------------------
// Beta sweep and ablation

struct BetaRow {
  double beta = 0;
  double ar = 0, rr = 0;
  GzslReport report;
};

/// Refits thresholds for each beta on the frozen model and scores the test split.
template <typename T>
std::vector<BetaRow> sweep_beta(Model<T>& model, std::span<const GestureSequence> train_data,
                                std::span<const GestureSequence> test_data, const AttributeTable& table,
                                std::span<const double> betas, const TrainConfig& config) {
  require_seen(train_data, table, "sweep_beta");
  const Inference<T> inf = infer(model, train_data);
  const ThresholdSamples<T> samples = threshold_samples(inf, train_data, table, config.threshold_correct_only);
  const TestCache<T> cache = build_cache(model, test_data, table);
  std::vector<BetaRow> rows;
  for (double beta : betas) {
    const ThresholdSet<T> th = fit_thresholds(samples, model.bank.classes, model.bank.per_class,
                                              ThresholdFitOptions{beta, config.threshold_epochs, config.threshold_learning_rate});
    BetaRow row;
    row.beta = beta;
    row.report = score(cache, table, th.radii, Routing::kTwoStage);
    row.ar = row.report.ar.value_or(0.0);
    row.rr = row.report.rr.value_or(0.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_beta_table(std::ostream& os, std::span<const BetaRow> rows) {
  os << "beta,ar,rr\n";
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f\n", r.beta, r.ar, r.rr);
    os << buf;
  }
}

struct AblationRow {
  std::string configuration;
  GzslReport report;
};

struct AblationOptions {
  std::vector<double> fixed_thresholds = {0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
};

using ProgressCallback = std::function<void(const std::string& stage, const EpochLoss&)>;

/// Encoder + SAE trained without the detector terms; every test sample is
/// labelled by the SAE over all attribute rows.
template <typename T>
std::pair<Model<T>, GzslReport> train_sae_only_baseline(const ModelConfig& model_config,
                                                        std::span<const GestureSequence> train_data,
                                                        std::span<const GestureSequence> test_data,
                                                        const AttributeTable& table, const TrainConfig& config,
                                                        const EpochCallback& on_epoch = nullptr) {
  Model<T> m = Model<T>::init(model_config, config.seed);
  TrainConfig cfg = config;
  cfg.weights.dce = 0;
  cfg.weights.lambda1 = 0;
  train(m, train_data, table, cfg, kEncoderGroup | kSaeGroup, on_epoch);
  const TestCache<T> c = build_cache(m, test_data, table);
  GzslReport r = score(c, table, Matrix<T>(Matrix<T>::Zero(m.bank.classes, m.bank.per_class)), Routing::kSaeOnly);
  return {std::move(m), std::move(r)};
}

/// Trains and scores the four framework variants on normalized splits:
///   a  encoder + SAE without the detector; SAE searches every class
///   b  end-to-end model with one global threshold (one row per value)
///   c  detector trained first, then the SAE on frozen features
///   d  full end-to-end model with fitted thresholds
template <typename T>
std::vector<AblationRow> ablate(const ModelConfig& model_config, std::span<const GestureSequence> train_data,
                                std::span<const GestureSequence> test_data, const AttributeTable& table,
                                const TrainConfig& config, const AblationOptions& options = {},
                                const ProgressCallback& progress = nullptr) {
  auto hook = [&](const std::string& stage) -> EpochCallback {
    if (!progress) return nullptr;
    return [progress, stage](const EpochLoss& e) { progress(stage, e); };
  };
  std::vector<AblationRow> rows;

  // (a)
  {
    const auto [m, report] = train_sae_only_baseline<T>(model_config, train_data, test_data, table, config, hook("a"));
    rows.push_back({"a:blstm+sae", report});
  }

  // (d) and (b) share one end-to-end model.
  {
    Model<T> m = Model<T>::init(model_config, config.seed);
    train(m, train_data, table, config, kAllGroups, hook("d"));
    m.thresholds = fit_thresholds(m, train_data, table, config);
    const TestCache<T> c = build_cache(m, test_data, table);
    for (double th : options.fixed_thresholds) {
      char name[48];
      std::snprintf(name, sizeof name, "b:fixed_threshold=%g", th);
      rows.push_back({name, score(c, table, Matrix<T>(Matrix<T>::Constant(m.bank.classes, m.bank.per_class, static_cast<T>(th))),
                                  Routing::kTwoStage)});
    }
    rows.push_back({"d:end_to_end", score(c, table, m.thresholds->radii, Routing::kTwoStage)});
  }

  // (c)
  {
    Model<T> m = Model<T>::init(model_config, config.seed);
    TrainConfig cfg = config;
    cfg.weights.lambda2 = 0;
    cfg.weights.lambda3 = 0;
    train(m, train_data, table, cfg, kEncoderGroup | kPrototypeGroup, hook("c:detector"));
    const Inference<T> inf = infer(m, train_data);
    std::vector<int> labels;
    for (const auto& s : train_data) labels.push_back(s.label);
    train_sae_on_features(m, inf.features, labels, table, config, hook("c:sae"));
    m.thresholds = fit_thresholds(m, train_data, table, config);
    const TestCache<T> c = build_cache(m, test_data, table);
    rows.push_back({"c:two_stage", score(c, table, m.thresholds->radii, Routing::kTwoStage)});
  }

  // Table order: a, b..., c, d
  std::vector<AblationRow> ordered;
  for (const char prefix : {'a', 'b', 'c', 'd'})
    for (const auto& r : rows)
      if (r.configuration.front() == prefix) ordered.push_back(r);
  return ordered;
}

inline void write_ablation_table(std::ostream& os, std::span<const AblationRow> rows) {
  os << "configuration,acc_s,acc_u,h,ar,rr,seconds_per_sample\n";
  for (const auto& r : rows) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", r.report.seconds_per_sample);
    os << r.configuration << ',' << fraction_cell(r.report.acc_s) << ',' << fraction_cell(r.report.acc_u) << ','
       << fraction_cell(r.report.h) << ',' << fraction_cell(r.report.ar) << ',' << fraction_cell(r.report.rr) << ','
       << secs << '\n';
  }
}

}  // namespace gzsl

#endif  // GZSL_EVAL_HPP
