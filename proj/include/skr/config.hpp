#pragma once

// Flat key-value configuration. Keys mirror the CLI flag names:
//
//   # comment
//   alpha = 10
//   lr = 0.001
//
// Later assignments override earlier ones, so the CLI applies defaults, then
// the file, then flags.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skr/errors.hpp"
#include "skr/graph.hpp"
#include "skr/trainer.hpp"

namespace skr {

namespace detail {

inline double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (v.empty() || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, 10);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

/// Sets one TrainConfig field by its flag name. Unknown keys are an error.
inline void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "alpha") cfg.alpha = to_real(key, value);
  else if (key == "nu") cfg.nu = to_real(key, value);
  else if (key == "c_v") cfg.c_v = to_real(key, value);
  else if (key == "lr") cfg.learning_rate = to_real(key, value);
  else if (key == "epochs") cfg.epochs = to_uint(key, value);
  else if (key == "layers") cfg.num_layers = to_uint(key, value);
  else if (key == "hidden") cfg.hidden_dim = to_uint(key, value);
  else if (key == "embed_dim") cfg.embed_dim = to_uint(key, value);
  else if (key == "batch") cfg.batch_size = to_uint(key, value);
  else if (key == "seed") cfg.seed = to_uint(key, value);
  else if (key == "beta1") cfg.beta1 = to_real(key, value);
  else if (key == "beta2") cfg.beta2 = to_real(key, value);
  else if (key == "adam_eps") cfg.adam_eps = to_real(key, value);
  else if (key == "dirichlet") cfg.dirichlet = to_bool(key, value);
  else if (key == "loss") {
    if (value == "fuzzy") cfg.loss = LossKind::fuzzy;
    else if (value == "normal") cfg.loss = LossKind::normal;
    else throw ConfigError("loss: expected 'fuzzy' or 'normal', got '" + value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  KeyValues out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    auto body = detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    out.emplace_back(std::string(detail::trim(body.substr(0, eq))),
                     std::string(detail::trim(body.substr(eq + 1))));
  }
  return out;
}

inline void write_config(std::ostream& out, const TrainConfig& c) {
  out << std::setprecision(17) << "alpha = " << c.alpha << "\nnu = " << c.nu << "\nc_v = " << c.c_v
      << "\nlr = " << c.learning_rate << "\nepochs = " << c.epochs << "\nlayers = " << c.num_layers
      << "\nhidden = " << c.hidden_dim << "\nembed_dim = " << c.embed_dim
      << "\nbatch = " << c.batch_size << "\nseed = " << c.seed << "\nbeta1 = " << c.beta1
      << "\nbeta2 = " << c.beta2 << "\nadam_eps = " << c.adam_eps
      << "\ndirichlet = " << (c.dirichlet ? "true" : "false")
      << "\nloss = " << (c.loss == LossKind::fuzzy ? "fuzzy" : "normal") << '\n';
}

}  // namespace skr
