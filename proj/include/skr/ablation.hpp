#pragma once

// Train-then-evaluate runs over seeds, and the three ablation sweeps:
// alpha sensitivity, Dirichlet pooling on/off, fuzzy vs normal
// cross-entropy.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "skr/errors.hpp"
#include "skr/embeddings_io.hpp"
#include "skr/eval.hpp"
#include "skr/trainer.hpp"

namespace skr {

struct SeedResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;   // mean over evaluation runs
  double final_loss = 0.0; // loss of the last training step
};

struct SettingResult {
  std::string setting;
  double alpha = 0.0;
  std::vector<SeedResult> seeds;

  double mean_accuracy() const {
    double s = 0.0;
    for (const auto& r : seeds) s += r.accuracy;
    return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
  }
  double std_accuracy() const {
    const double m = mean_accuracy();
    double v = 0.0;
    for (const auto& r : seeds) v += (r.accuracy - m) * (r.accuracy - m);
    return seeds.empty() ? 0.0 : std::sqrt(v / static_cast<double>(seeds.size()));
  }
  double mean_final_loss() const {
    double s = 0.0;
    for (const auto& r : seeds) s += r.final_loss;
    return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
  }
};

/// Trains with seeds cfg.seed, cfg.seed+1, ... and evaluates each embedding.
inline SettingResult run_setting(const Dataset& ds, TrainConfig cfg, std::size_t num_seeds,
                                 const EvalOptions& eval, std::string label) {
  SettingResult out;
  out.setting = std::move(label);
  out.alpha = cfg.alpha;
  const auto base = cfg.seed;
  for (std::size_t s = 0; s < num_seeds; ++s) {
    cfg.seed = base + s;
    const auto trained = train(ds, cfg);
    const auto emb = embed_dataset(ds, trained.params);
    EvalOptions e = eval;
    e.seed = cfg.seed;
    const auto rep = cross_validate(to_matrix(emb.values), emb.labels, e);
    out.seeds.push_back({cfg.seed, rep.mean, trained.history.back().loss});
  }
  return out;
}

enum class AblationMode { alpha_sweep, no_dirichlet, normal_ce };

inline AblationMode parse_ablation_mode(const std::string& s) {
  if (s == "alpha-sweep") return AblationMode::alpha_sweep;
  if (s == "no-dirichlet") return AblationMode::no_dirichlet;
  if (s == "normal-ce") return AblationMode::normal_ce;
  throw ConfigError("unknown ablation mode '" + s + "'");
}

inline std::vector<SettingResult> run_ablation(const Dataset& ds, const TrainConfig& cfg,
                                               AblationMode mode, const std::vector<double>& alphas,
                                               std::size_t num_seeds, const EvalOptions& eval) {
  std::vector<SettingResult> rows;
  switch (mode) {
    case AblationMode::alpha_sweep:
      if (alphas.empty()) throw ConfigError("alpha sweep needs at least one alpha");
      for (double a : alphas) {
        TrainConfig c = cfg;
        c.alpha = a;
        c.dirichlet = true;
        rows.push_back(run_setting(ds, c, num_seeds, eval, "alpha"));
      }
      break;
    case AblationMode::no_dirichlet: {
      TrainConfig with = cfg, without = cfg;
      with.dirichlet = true;
      without.dirichlet = false;
      rows.push_back(run_setting(ds, with, num_seeds, eval, "dirichlet"));
      rows.push_back(run_setting(ds, without, num_seeds, eval, "no-dirichlet"));
      break;
    }
    case AblationMode::normal_ce: {
      TrainConfig fuzzy = cfg, normal = cfg;
      fuzzy.loss = LossKind::fuzzy;
      normal.loss = LossKind::normal;
      rows.push_back(run_setting(ds, fuzzy, num_seeds, eval, "fuzzy-ce"));
      rows.push_back(run_setting(ds, normal, num_seeds, eval, "normal-ce"));
      break;
    }
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& out, const std::vector<SettingResult>& rows) {
  out << "setting,alpha,seeds,accuracy_mean,accuracy_std,final_loss_mean\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.setting << ',' << r.alpha << ',' << r.seeds.size() << ',' << r.mean_accuracy() << ','
        << r.std_accuracy() << ',' << r.mean_final_loss() << '\n';
}

}  // namespace skr
