#ifndef GZSL_CHECKPOINT_HPP
#define GZSL_CHECKPOINT_HPP

// Named-tensor checkpoint (JSON). Holds every learnable tensor, the fitted
// thresholds, normalization statistics and the configuration used.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gzsl/dataset.hpp"
#include "gzsl/model.hpp"

namespace gzsl {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"input_width", c.encoder.input_width}, {"layers", c.encoder.layers},   {"hidden", c.encoder.hidden},
          {"readout", readout_name(c.encoder.readout)}, {"proto_dim", c.proto_dim}, {"classes", c.classes},
          {"prototypes_per_class", c.per_class},         {"gamma", c.gamma},         {"sae_hidden", c.sae_hidden},
          {"attributes", c.attributes}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder.input_width = j.at("input_width").get<Index>();
  c.encoder.layers = j.at("layers").get<Index>();
  c.encoder.hidden = j.at("hidden").get<Index>();
  c.encoder.readout = parse_readout(j.at("readout").get<std::string>());
  c.proto_dim = j.at("proto_dim").get<Index>();
  c.classes = j.at("classes").get<Index>();
  c.per_class = j.at("prototypes_per_class").get<Index>();
  c.gamma = j.at("gamma").get<double>();
  c.sae_hidden = j.at("sae_hidden").get<Index>();
  c.attributes = j.at("attributes").get<Index>();
  return c;
}

namespace detail {
template <typename T>
nlohmann::json matrix_to_json(const std::vector<Index>& shape, const Matrix<T>& m) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) values[static_cast<std::size_t>(i)] = static_cast<double>(m.data()[i]);
  return {{"shape", shape}, {"values", values}};
}

template <typename T>
void matrix_from_json(const nlohmann::json& j, const std::vector<Index>& expected_shape, Matrix<T>& out,
                      const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape != expected_shape)
    throw CheckpointError("tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                          shape_string(expected_shape));
  const auto values = j.at("values").get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != out.size())
    throw CheckpointError("tensor '" + name + "' holds " + std::to_string(values.size()) + " values, expected " +
                          std::to_string(out.size()));
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<T>(values[static_cast<std::size_t>(i)]);
}
}  // namespace detail

template <typename T>
nlohmann::json checkpoint_to_json(Model<T>& model, const AttributeTable& table, const nlohmann::json& run_config = {}) {
  nlohmann::json j;
  j["format"] = "gzsl-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = model_config_to_json(model.config);
  std::vector<std::string> seen, unseen;
  for (int l : table.seen_labels()) seen.push_back(table.info(l).name);
  for (int l : table.unseen_labels()) unseen.push_back(table.info(l).name);
  j["seen_classes"] = seen;
  j["unseen_classes"] = unseen;
  nlohmann::json tensors = nlohmann::json::array();
  model.for_each_parameter([&](const std::string& name, Tensor<T>& t, unsigned) {
    nlohmann::json e = detail::matrix_to_json(t.shape(), t.value());
    e["name"] = name;
    tensors.push_back(std::move(e));
  });
  j["tensors"] = tensors;
  j["thresholds"] = model.thresholds
                        ? detail::matrix_to_json(std::vector<Index>{model.bank.classes, model.bank.per_class},
                                                 model.thresholds->radii)
                        : nlohmann::json(nullptr);
  j["normalization"] = model.normalization ? detail::stats_to_json(*model.normalization) : nlohmann::json(nullptr);
  j["config"] = run_config.is_null() ? nlohmann::json::object() : run_config;
  return j;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, Model<T>& model, const AttributeTable& table,
                     const nlohmann::json& run_config = {}) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, table, run_config).dump() << '\n';
}

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  std::vector<std::string> seen_classes, unseen_classes;
  nlohmann::json config;
};

template <typename T>
LoadedCheckpoint<T> checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "gzsl-checkpoint") throw CheckpointError("not a gzsl checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    LoadedCheckpoint<T> out;
    out.model = Model<T>::init(model_config_from_json(j.at("model")), 0);
    std::set<std::string> seen_names;
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& e : j.at("tensors")) by_name[e.at("name").get<std::string>()] = &e;
    out.model.for_each_parameter([&](const std::string& name, Tensor<T>& t, unsigned) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor '" + name + "'");
      detail::matrix_from_json(*it->second, t.shape(), t.value(), name);
      seen_names.insert(name);
    });
    for (const auto& [name, _] : by_name)
      if (!seen_names.count(name)) throw CheckpointError("checkpoint has unexpected tensor '" + name + "'");
    if (!j.at("thresholds").is_null()) {
      ThresholdSet<T> th{Matrix<T>(out.model.bank.classes, out.model.bank.per_class)};
      detail::matrix_from_json(j["thresholds"], {out.model.bank.classes, out.model.bank.per_class}, th.radii, "thresholds");
      out.model.thresholds = th;
    }
    if (!j.at("normalization").is_null()) out.model.normalization = detail::stats_from_json(j["normalization"]);
    out.seen_classes = j.at("seen_classes").get<std::vector<std::string>>();
    out.unseen_classes = j.at("unseen_classes").get<std::vector<std::string>>();
    out.config = j.value("config", nlohmann::json::object());
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json<T>(j);
}

/// Checks that a dataset's class partition matches the one a model was trained on.
inline void check_class_partition(const std::vector<std::string>& seen, const std::vector<std::string>& unseen,
                                  const AttributeTable& table) {
  std::vector<std::string> ts, tu;
  for (int l : table.seen_labels()) ts.push_back(table.info(l).name);
  for (int l : table.unseen_labels()) tu.push_back(table.info(l).name);
  if (ts != seen || tu != unseen) throw CheckpointError("dataset classes do not match the checkpoint's class lists");
}

}  // namespace gzsl

#endif  // GZSL_CHECKPOINT_HPP
