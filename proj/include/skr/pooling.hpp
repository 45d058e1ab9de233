#pragma once

// Graph readouts. mean_pool averages node rows per graph; dirichlet_pool
// replaces the uniform 1/|G| weights with a symmetric Dirichlet(alpha) draw,
// so every augmented row stays inside the convex hull of its node rows.
// Large alpha concentrates the draw at uniform weights, small alpha pushes it
// toward a vertex of the simplex (a single node row).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "skr/errors.hpp"
#include "skr/rng.hpp"
#include "skr/tensor.hpp"

namespace skr {

/// Natural log of a Gamma(shape, 1) variate.
///
/// Marsaglia & Tsang (2000) squeeze method for shape >= 1. For shape < 1
/// a Gamma(shape + 1) draw is boosted by U^(1/shape); the boost is applied in
/// log space because for tiny shapes U^(1/shape) underflows double precision.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw ConfigError("gamma shape must be positive and finite");
  double boost = 0.0;
  if (shape < 1.0) {
    boost = std::log(rng.uniform_open()) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
      return std::log(d) + std::log(v) + boost;
  }
}

inline double gamma_variate(double shape, Rng& rng) {
  return std::exp(log_gamma_variate(shape, rng));
}

/// Simplex weights for one graph's nodes.
using DirichletWeights = std::vector<double>;

/// One draw from symmetric Dirichlet(alpha, ..., alpha) over n coordinates:
/// n independent Gamma(alpha, 1) variates normalized by their sum. The
/// normalization runs on log-variates shifted by their maximum, so the sum
/// is always at least 1 and never needs a re-draw.
inline DirichletWeights sample_dirichlet_weights(std::size_t n, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("Dirichlet alpha must be positive");
  if (n == 0) throw ConfigError("Dirichlet over zero coordinates");
  DirichletWeights w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (auto& x : w) {
    x = log_gamma_variate(alpha, rng);
    hi = std::max(hi, x);
  }
  double total = 0.0;
  for (auto& x : w) {
    x = std::exp(x - hi);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

/// Per-node pooling weights for every segment, drawing segment g's weights
/// from `stream(g)` (which must return an Rng).
template <typename StreamFn>
std::vector<double> sample_pool_weights(const Segments& seg, double alpha, StreamFn&& stream) {
  std::vector<double> weights(seg.num_nodes());
  for (std::size_t g = 0; g < seg.num_segments(); ++g) {
    if (seg.count(g) == 0)
      throw ShapeError("dirichlet_pool: segment " + std::to_string(g) + " is empty");
    Rng rng = stream(g);
    const auto w = sample_dirichlet_weights(seg.count(g), alpha, rng);
    std::copy(w.begin(), w.end(), weights.begin() + static_cast<std::ptrdiff_t>(seg.begin(g)));
  }
  return weights;
}

/// Row g = mean of the node rows of graph g.
inline Tensor mean_pool(Tape& tape, const Tensor& node_reps, const Segments& seg) {
  return segment_mean(tape, node_reps, seg);
}

/// Row g = sum_j w_j * node_reps[j] with fresh Dirichlet(alpha) weights per
/// graph, drawn sequentially from `rng`. Weights are constants to the tape.
inline Tensor dirichlet_pool(Tape& tape, const Tensor& node_reps, const Segments& seg,
                             double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("Dirichlet alpha must be positive");
  std::vector<double> weights(seg.num_nodes());
  for (std::size_t g = 0; g < seg.num_segments(); ++g) {
    if (seg.count(g) == 0)
      throw ShapeError("dirichlet_pool: segment " + std::to_string(g) + " is empty");
    const auto w = sample_dirichlet_weights(seg.count(g), alpha, rng);
    std::copy(w.begin(), w.end(), weights.begin() + static_cast<std::ptrdiff_t>(seg.begin(g)));
  }
  return weighted_segment_sum(tape, node_reps, seg, weights);
}

}  // namespace skr
