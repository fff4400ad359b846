// Command-line entry points: gen-data, train, fit-thresholds, eval, ablate, sweep-beta.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gzsl/gzsl.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<long long> epochs;
  std::optional<double> beta;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "override a setting, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--beta", o.beta, "threshold regularization weight");
}

gzsl::RunConfig resolve(const CommonOptions& o) {
  gzsl::RunConfig c;
  if (!o.config.empty()) gzsl::apply_config_file(c, o.config);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw gzsl::ConfigError("--set expects key=value, got '" + kv + "'");
    gzsl::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.train.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.beta) c.train.beta = *o.beta;
  c.train.validate();
  return c;
}

struct PreparedData {
  gzsl::Dataset dataset;
  std::vector<gzsl::GestureSequence> train, test;
};

PreparedData prepare(const std::string& dir, const std::optional<gzsl::NormalizationStats>& stats) {
  PreparedData p{gzsl::load_dataset(dir), {}, {}};
  const auto views = gzsl::split_views(p.dataset);
  const auto train = views.train.materialize();
  const gzsl::NormalizationStats st = stats ? *stats : gzsl::fit_normalization(train, p.dataset.manifest.palm_offset);
  p.train = gzsl::normalize(train, st);
  p.test = gzsl::normalize(views.test.samples(), st);
  return p;
}

gzsl::ModelConfig model_for(const gzsl::RunConfig& c, const gzsl::Dataset& d) {
  gzsl::ModelConfig m = c.model;
  m.encoder.input_width = d.manifest.frame_width;
  m.classes = static_cast<gzsl::Index>(d.attributes.seen_labels().size());
  m.attributes = d.attributes.width();
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void log_epoch(const std::string& stage, const gzsl::EpochLoss& e) {
  std::fprintf(stderr, "[%s] epoch %3lld  total %.5f  dce %.5f  pl %.5f  attr %.5f  res %.5f\n", stage.c_str(),
               static_cast<long long>(e.epoch), e.total, e.dce, e.pl, e.attr, e.res);
}

std::string history_csv(const std::vector<gzsl::EpochLoss>& h) {
  std::ostringstream os;
  os << "epoch,l_dce,l_pl,l_attr,l_res,total\n";
  char buf[256];
  for (const auto& e : h) {
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<long long>(e.epoch), e.dce, e.pl,
                  e.attr, e.res, e.total);
    os << buf;
  }
  return os.str();
}

int checkpoint_precision(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gzsl::CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw gzsl::CheckpointError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return j.value("config", nlohmann::json::object()).value("precision", 32);
}

// ---------------------------------------------------------------------------

template <typename T>
int run_train(const gzsl::RunConfig& cfg, const std::string& data_dir, const fs::path& checkpoint,
              const std::string& history_path) {
  PreparedData d = prepare(data_dir, std::nullopt);
  gzsl::Model<T> model = gzsl::Model<T>::init(model_for(cfg, d.dataset), cfg.train.seed);
  model.normalization = gzsl::fit_normalization(gzsl::split_views(d.dataset).train.materialize(),
                                                d.dataset.manifest.palm_offset);
  const auto history = gzsl::train(model, d.train, d.dataset.attributes, cfg.train, gzsl::kAllGroups,
                                   [](const gzsl::EpochLoss& e) { log_epoch("train", e); });
  model.thresholds = gzsl::fit_thresholds(model, d.train, d.dataset.attributes, cfg.train);
  gzsl::save_checkpoint(checkpoint, model, d.dataset.attributes, gzsl::run_config_to_json(cfg));
  const fs::path hist = history_path.empty() ? fs::path(checkpoint).replace_extension(".loss.csv") : fs::path(history_path);
  write_text(hist, history_csv(history));
  std::cout << "trained " << history.size() << " epochs; checkpoint " << checkpoint.string() << "; loss history "
            << hist.string() << "\n";
  return 0;
}

template <typename T>
int run_fit(const gzsl::RunConfig& cfg, const std::string& data_dir, const fs::path& checkpoint, const fs::path& out) {
  auto ck = gzsl::load_checkpoint<T>(checkpoint);
  PreparedData d = prepare(data_dir, ck.model.normalization);
  gzsl::check_class_partition(ck.seen_classes, ck.unseen_classes, d.dataset.attributes);
  std::vector<double> losses;
  ck.model.thresholds = gzsl::fit_thresholds(ck.model, d.train, d.dataset.attributes, cfg.train, &losses);
  nlohmann::json run = ck.config;
  run["beta"] = cfg.train.beta;
  run["threshold_epochs"] = cfg.train.threshold_epochs;
  run["threshold_learning_rate"] = cfg.train.threshold_learning_rate;
  run["threshold_correct_only"] = cfg.train.threshold_correct_only;
  gzsl::save_checkpoint(out, ck.model, d.dataset.attributes, run);
  std::cout << "fitted thresholds (beta " << cfg.train.beta << "), loss " << losses.front() << " -> " << losses.back()
            << "; wrote " << out.string() << "\n";
  return 0;
}

template <typename T>
int run_eval(const std::string& data_dir, const fs::path& checkpoint, const fs::path& out_dir) {
  auto ck = gzsl::load_checkpoint<T>(checkpoint);
  if (!ck.model.thresholds) throw gzsl::ThresholdError("checkpoint has no fitted thresholds; run fit-thresholds first");
  PreparedData d = prepare(data_dir, ck.model.normalization);
  gzsl::check_class_partition(ck.seen_classes, ck.unseen_classes, d.dataset.attributes);
  const gzsl::GzslReport r = gzsl::evaluate(ck.model, d.test, d.dataset.attributes);
  std::ostringstream report, confusion, summary;
  gzsl::write_report_header(report);
  gzsl::write_report_row(report, "end_to_end", r);
  gzsl::write_confusion(confusion, r, d.dataset.attributes);
  write_text(out_dir / "report.csv", report.str());
  write_text(out_dir / "confusion.csv", confusion.str());
  char secs[64];
  std::snprintf(secs, sizeof secs, "seconds_per_sample\n%.6f\n", r.seconds_per_sample);
  write_text(out_dir / "timing.csv", secs);
  gzsl::write_summary(std::cout, "end_to_end", r);
  return 0;
}

template <typename T>
int run_ablate(const gzsl::RunConfig& cfg, const std::string& data_dir, const fs::path& out) {
  PreparedData d = prepare(data_dir, std::nullopt);
  const auto rows = gzsl::ablate<T>(model_for(cfg, d.dataset), d.train, d.test, d.dataset.attributes, cfg.train, {},
                                    [](const std::string& stage, const gzsl::EpochLoss& e) { log_epoch(stage, e); });
  std::ostringstream table;
  gzsl::write_ablation_table(table, rows);
  write_text(out, table.str());
  for (const auto& r : rows) gzsl::write_summary(std::cout, r.configuration, r.report);
  return 0;
}

template <typename T>
int run_sweep(const gzsl::RunConfig& cfg, const std::string& data_dir, const fs::path& checkpoint,
              const std::vector<double>& betas, const fs::path& out) {
  auto ck = gzsl::load_checkpoint<T>(checkpoint);
  PreparedData d = prepare(data_dir, ck.model.normalization);
  gzsl::check_class_partition(ck.seen_classes, ck.unseen_classes, d.dataset.attributes);
  const auto rows = gzsl::sweep_beta(ck.model, d.train, d.test, d.dataset.attributes, betas, cfg.train);
  std::ostringstream table;
  gzsl::write_beta_table(table, rows);
  write_text(out, table.str());
  std::cout << table.str();
  return 0;
}

template <typename Fn>
int dispatch(int precision, Fn&& fn) {
  return precision == 64 ? fn(double{}) : fn(float{});
}

}  // namespace

int main(int argc, char** argv) {
  gzsl::configure_allocator();
  CLI::App app{"Prototype-based generalized zero-shot gesture recognition"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic gesture dataset");
  gzsl::GeneratorSpec spec;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--classes-seen", spec.classes_seen, "number of seen classes");
  gen->add_option("--classes-unseen", spec.classes_unseen, "number of unseen classes");
  gen->add_option("--train-per-class", spec.train_per_class, "training sequences per seen class");
  gen->add_option("--test-per-class", spec.test_per_class, "test sequences per class");
  gen->add_option("--sequence-length", spec.sequence_length, "frames per sequence");
  gen->add_option("--noise", spec.noise, "noise level");
  gen->add_option("--out-dir", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the model and fit thresholds");
  CommonOptions tr_opts;
  std::string tr_data, tr_ckpt, tr_hist;
  add_common(tr, tr_opts);
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--checkpoint", tr_ckpt, "output checkpoint path")->required();
  tr->add_option("--history", tr_hist, "loss history CSV (default: <checkpoint>.loss.csv)");

  // fit-thresholds
  auto* fit = app.add_subcommand("fit-thresholds", "refit thresholds of a trained checkpoint");
  CommonOptions fit_opts;
  std::string fit_data, fit_ckpt, fit_out;
  add_common(fit, fit_opts);
  fit->add_option("--data", fit_data, "dataset directory")->required();
  fit->add_option("--checkpoint", fit_ckpt, "input checkpoint")->required();
  fit->add_option("--out", fit_out, "output checkpoint (default: overwrite input)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ev_data, ev_ckpt, ev_out = "report";
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path");
  ev->add_option("--out-dir", ev_out, "report directory");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and compare the framework variants");
  CommonOptions ab_opts;
  std::string ab_data, ab_out = "ablation.csv";
  add_common(ab, ab_opts);
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--out", ab_out, "output CSV");

  // sweep-beta
  auto* sw = app.add_subcommand("sweep-beta", "acceptance/rejection rates over a beta grid");
  CommonOptions sw_opts;
  std::string sw_data, sw_ckpt, sw_out = "sweep_beta.csv";
  std::vector<double> sw_values = {0.5, 0.2, 0.05, 0.02, 0.01, 0.005};
  add_common(sw, sw_opts);
  sw->add_option("--data", sw_data, "dataset directory")->required();
  sw->add_option("--checkpoint", sw_ckpt, "trained checkpoint")->required();
  sw->add_option("--values", sw_values, "comma-separated beta values")->delimiter(',');
  sw->add_option("--out", sw_out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*gen) {
      const gzsl::Dataset d = gzsl::generate_synthetic(gen_seed, spec);
      gzsl::save_dataset(d, gen_out);
      std::cout << "wrote " << d.train.size() << " train / " << d.test.size() << " test sequences ("
                << d.attributes.seen_labels().size() << " seen, " << d.attributes.unseen_labels().size()
                << " unseen classes) to " << gen_out << "\n";
      return 0;
    }
    if (*tr) {
      const auto cfg = resolve(tr_opts);
      return dispatch(cfg.precision, [&](auto tag) { return run_train<decltype(tag)>(cfg, tr_data, tr_ckpt, tr_hist); });
    }
    if (*fit) {
      auto cfg = resolve(fit_opts);
      const int precision = checkpoint_precision(fit_ckpt);
      const fs::path out = fit_out.empty() ? fs::path(fit_ckpt) : fs::path(fit_out);
      return dispatch(precision, [&](auto tag) { return run_fit<decltype(tag)>(cfg, fit_data, fit_ckpt, out); });
    }
    if (*ev) {
      if (ev_ckpt.empty()) throw gzsl::CheckpointError("eval needs a trained checkpoint (--checkpoint)");
      const int precision = checkpoint_precision(ev_ckpt);
      return dispatch(precision, [&](auto tag) { return run_eval<decltype(tag)>(ev_data, ev_ckpt, ev_out); });
    }
    if (*ab) {
      const auto cfg = resolve(ab_opts);
      return dispatch(cfg.precision, [&](auto tag) { return run_ablate<decltype(tag)>(cfg, ab_data, ab_out); });
    }
    if (*sw) {
      const auto cfg = resolve(sw_opts);
      const int precision = checkpoint_precision(sw_ckpt);
      return dispatch(precision,
                      [&](auto tag) { return run_sweep<decltype(tag)>(cfg, sw_data, sw_ckpt, sw_values, sw_out); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
