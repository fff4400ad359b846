#ifndef GZSL_CONFIG_HPP
#define GZSL_CONFIG_HPP

// Flat `key = value` configuration files ('#' starts a comment; [sections]
// are ignored) and the setting table shared by the config file and the
// command-line overrides.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gzsl/model.hpp"
#include "gzsl/trainer.hpp"

namespace gzsl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  int precision = 32;
};

namespace detail {
inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("setting '" + key + "': expected true/false, got '" + v + "'");
}
}  // namespace detail

inline void apply_setting(RunConfig& c, const std::string& key, std::string value) {
  value = detail::trim(value);
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
    value = value.substr(1, value.size() - 2);
  auto& t = c.train;
  auto& m = c.model;
  if (key == "seed") t.seed = static_cast<std::uint64_t>(detail::to_int(key, value));
  else if (key == "epochs") t.epochs = detail::to_int(key, value);
  else if (key == "batch_size") t.batch_size = detail::to_int(key, value);
  else if (key == "learning_rate") t.learning_rate = detail::to_double(key, value);
  else if (key == "lambda1") t.weights.lambda1 = detail::to_double(key, value);
  else if (key == "lambda2") t.weights.lambda2 = detail::to_double(key, value);
  else if (key == "lambda3") t.weights.lambda3 = detail::to_double(key, value);
  else if (key == "beta") t.beta = detail::to_double(key, value);
  else if (key == "threshold_epochs") t.threshold_epochs = detail::to_int(key, value);
  else if (key == "threshold_learning_rate") t.threshold_learning_rate = detail::to_double(key, value);
  else if (key == "threshold_correct_only") t.threshold_correct_only = detail::to_bool(key, value);
  else if (key == "layers") m.encoder.layers = detail::to_int(key, value);
  else if (key == "hidden") m.encoder.hidden = detail::to_int(key, value);
  else if (key == "readout") m.encoder.readout = parse_readout(value);
  else if (key == "proto_dim") m.proto_dim = detail::to_int(key, value);
  else if (key == "prototypes_per_class") m.per_class = detail::to_int(key, value);
  else if (key == "gamma") m.gamma = detail::to_double(key, value);
  else if (key == "sae_hidden") m.sae_hidden = detail::to_int(key, value);
  else if (key == "precision") {
    c.precision = static_cast<int>(detail::to_int(key, value));
    if (c.precision != 32 && c.precision != 64) throw ConfigError("precision must be 32 or 64");
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

/// Applies `key = value` lines from text.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& origin = "config") {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(c, text, path.string());
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  const auto& t = c.train;
  return {{"seed", t.seed},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"lambda1", t.weights.lambda1},
          {"lambda2", t.weights.lambda2},
          {"lambda3", t.weights.lambda3},
          {"beta", t.beta},
          {"threshold_epochs", t.threshold_epochs},
          {"threshold_learning_rate", t.threshold_learning_rate},
          {"threshold_correct_only", t.threshold_correct_only},
          {"precision", c.precision}};
}

}  // namespace gzsl

#endif  // GZSL_CONFIG_HPP
