#pragma once

// Minibatched structure-knowledge refinement. Each step encodes a batch with
// the GIN, builds a detached semantic target S from Dirichlet-pooled node
// representations, builds trainable embedding knowledge E from the projected
// mean-pooled representations, and takes an Adam step on the cross-entropy
// between them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "skr/encoder.hpp"
#include "skr/errors.hpp"
#include "skr/graph.hpp"
#include "skr/knowledge.hpp"
#include "skr/pooling.hpp"
#include "skr/rng.hpp"
#include "skr/tensor.hpp"

namespace skr {

enum class LossKind { fuzzy, normal };

struct TrainConfig {
  double alpha = 10.0;
  double nu = 1000.0;
  double c_v = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t num_layers = 4;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 128;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Ablation switches.
  bool dirichlet = true;
  LossKind loss = LossKind::fuzzy;

  T2Params t2() const { return {nu, c_v}; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(alpha, "alpha");
    positive(nu, "nu");
    positive(c_v, "c_v");
    positive(learning_rate, "learning_rate");
    positive(adam_eps, "adam_eps");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (num_layers == 0 || hidden_dim == 0 || embed_dim == 0)
      throw ConfigError("model dimensions must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  explicit AdamState(const std::vector<Tensor>& params = {}) {
    for (const auto& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
};

/// One bias-corrected Adam update of `params` from their accumulated grads.
inline void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state/parameter count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto val = params[k].values();
    auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != val.size()) throw ShapeError("adam_step: state shape mismatch");
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      val[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Batching

/// Random partition of 0..n-1 into batches of `batch_size`, reshuffled per
/// epoch. A final batch of a single graph is merged into the previous one.
inline std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t n,
                                                                std::size_t batch_size,
                                                                std::uint64_t seed,
                                                                std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (n < 2) throw ConfigError("training needs at least 2 graphs");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, {epoch, 0xba7c4ULL});
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto last = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), last.begin(), last.end());
  }
  return batches;
}

/// RNG stream for the Dirichlet draw of one graph in one epoch.
inline Rng dirichlet_stream(std::uint64_t seed, std::uint64_t epoch, std::size_t graph_id) {
  return Rng(seed, {epoch, static_cast<std::uint64_t>(graph_id), 0xd1c4ULL});
}

// ---------------------------------------------------------------------------
// Loss pieces

/// Semantic structure knowledge S for an encoded batch, as constants. With
/// `dirichlet` set it comes from Dirichlet-pooled node representations,
/// otherwise from the mean-pooled f^S.
inline Tensor semantic_target(const SemanticBatch& sb, const std::vector<std::size_t>& graph_ids,
                              const TrainConfig& cfg, std::uint64_t epoch) {
  Tape scratch;
  Tensor reps;
  if (cfg.dirichlet) {
    const auto weights = sample_pool_weights(sb.segments, cfg.alpha, [&](std::size_t g) {
      return dirichlet_stream(cfg.seed, epoch, graph_ids.at(g));
    });
    reps = weighted_segment_sum(scratch, sb.node_reps.detach(), sb.segments, weights);
  } else {
    reps = sb.graph_reps.detach();
  }
  return t2_map(scratch, pairwise_distances(scratch, reps), cfg.t2()).detach();
}

/// Embedding structure knowledge E = t2(pairwise(h_phi(f^S))), recorded on `tape`.
inline Tensor embedding_knowledge(Tape& tape, const SemanticBatch& sb, const HeadParams& head,
                                  const T2Params& t2) {
  return t2_map(tape, pairwise_distances(tape, project_embedding(tape, sb.graph_reps, head)), t2);
}

inline Tensor knowledge_loss(Tape& tape, const Tensor& target, const Tensor& probs, LossKind kind) {
  return kind == LossKind::fuzzy ? fuzzy_cross_entropy(tape, target, probs)
                                 : normal_cross_entropy(tape, target, probs);
}

struct StepOutput {
  Tensor loss;
  Tensor target;  // S
  Tensor probs;   // E
};

/// Forward pass for one batch, recorded on `tape`.
inline StepOutput skr_forward(Tape& tape, const GraphBatch& batch, const ModelParams& params,
                              const TrainConfig& cfg, std::uint64_t epoch) {
  const auto sb = encode_semantic(tape, batch, params.gin);
  StepOutput out;
  out.target = semantic_target(sb, batch.graph_ids, cfg, epoch);
  out.probs = embedding_knowledge(tape, sb, params.head, cfg.t2());
  out.loss = knowledge_loss(tape, out.target, out.probs, cfg.loss);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double mean_s = 0.0;
  double mean_e = 0.0;
  double seconds = 0.0;
};

using TrainHistory = std::vector<StepRecord>;

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

inline ModelShape model_shape(const TrainConfig& cfg, std::size_t input_dim) {
  return {input_dim, cfg.num_layers, cfg.hidden_dim, cfg.embed_dim};
}

/// Runs `cfg.epochs` epochs starting from `params` (modified in place).
inline TrainHistory train_from(const Dataset& ds, ModelParams& params, const TrainConfig& cfg) {
  cfg.validate();
  if (!ds.has_features()) throw ConfigError("dataset '" + ds.name + "' has no node features");
  if (params.gin.input_dim != ds.feature_dim)
    throw ConfigError("model input dim does not match dataset features");
  auto tensors = params.tensors();
  AdamState state(tensors);
  const AdamConfig adam{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps};
  TrainHistory history;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_epoch_batches(ds.size(), cfg.batch_size, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      StepRecord rec;
      rec.epoch = epoch;
      rec.batch = b;
      try {
        const auto batch = make_batch(ds, batches[b]);
        for (auto& t : tensors) t.zero_grad();
        Tape tape;
        const auto out = skr_forward(tape, batch, params, cfg, epoch);
        rec.loss = out.loss.item();
        rec.mean_s = off_diagonal_mean(out.target);
        rec.mean_e = off_diagonal_mean(out.probs);
        tape.backward(out.loss);
        for (const auto& t : tensors)
          for (double g : t.grad())
            if (!std::isfinite(g)) throw NumericError("non-finite gradient");
        adam_step(tensors, state, adam);
      } catch (const NumericError& e) {
        throw TrainError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " +
                         e.what());
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      history.push_back(rec);
    }
  }
  return history;
}

/// Initializes a model from `cfg.seed` and trains it.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (!ds.has_features()) throw ConfigError("dataset '" + ds.name + "' has no node features");
  Rng init_rng(cfg.seed, {0x1417ULL});
  TrainResult r;
  r.params = init_model(model_shape(cfg, ds.feature_dim), init_rng);
  r.history = train_from(ds, r.params, cfg);
  return r;
}

struct Embeddings {
  Tensor values;            // [graphs x d_out], dataset order
  std::vector<int> labels;
};

/// f^E for every graph in dataset order; no augmentation.
inline Embeddings embed_dataset(const Dataset& ds, const ModelParams& params,
                                std::size_t chunk = 256) {
  if (ds.feature_dim != params.gin.input_dim)
    throw CheckpointError("dataset feature dim " + std::to_string(ds.feature_dim) +
                          " does not match model input dim " + std::to_string(params.gin.input_dim));
  const std::size_t d = params.head.second.weight.cols();
  Embeddings e{Tensor(ds.size(), d), ds.labels()};
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + chunk); ++i) idx.push_back(i);
    Tape tape;
    const auto sb = encode_semantic(tape, make_batch(ds, idx), params.gin);
    const auto f = project_embedding(tape, sb.graph_reps, params.head);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) e.values(start + r, c) = f(r, c);
  }
  return e;
}

/// CSV with header epoch,batch,loss,mean_s,mean_e,seconds. With
/// `timing` off the seconds column is written as 0 so that reruns are
/// byte-identical.
inline void write_history_csv(std::ostream& out, const TrainHistory& h, bool timing = true) {
  out << "epoch,batch,loss,mean_s,mean_e,seconds\n";
  out << std::setprecision(17);
  for (const auto& r : h)
    out << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.mean_s << ',' << r.mean_e << ','
        << (timing ? r.seconds : 0.0) << '\n';
}

}  // namespace skr
