#pragma once

// Pairwise structure knowledge. Distances between graph representations are
// mapped through C_v * (1 + d/nu)^-(nu+1) into probabilities that a pair
// shares semantics; a binary cross-entropy with soft targets (the "fuzzy"
// cross-entropy) then pulls embedding-space probabilities E toward the
// semantic-space probabilities S.

#include <algorithm>
#include <cmath>
#include <string>

#include "skr/errors.hpp"
#include "skr/tensor.hpp"

namespace skr {

struct T2Params {
  double nu = 1000.0;
  double c_v = 1.0;
};

/// Probabilities of E are clamped into [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

/// Euclidean (not squared) distances between rows. Exactly symmetric with
/// zero diagonal. Coincident rows contribute zero gradient.
inline Tensor pairwise_distances(Tape& tape, const Tensor& reps) {
  const std::size_t m = reps.rows(), h = reps.cols();
  if (m < 2) throw ConfigError("pairwise_distances needs at least 2 rows, got " + std::to_string(m));
  Tensor out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto ri = reps.row(i);
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto rj = reps.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < h; ++c) {
        const double d = ri[c] - rj[c];
        s += d * d;
      }
      out(i, j) = out(j, i) = std::sqrt(s);
    }
  }
  check_finite(out, "pairwise_distances");
  tape.record("pairwise_distances", out, {reps}, [reps, out, m, h]() mutable {
    auto g = out.grad();
    auto rg = reps.grad();
    auto rv = reps.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double d = out(i, j);
        if (d <= 0.0) continue;
        const double gij = (g[i * m + j] + g[j * m + i]) / d;
        if (gij == 0.0) continue;
        for (std::size_t c = 0; c < h; ++c) {
          const double diff = rv[i * h + c] - rv[j * h + c];
          rg[i * h + c] += gij * diff;
          rg[j * h + c] -= gij * diff;
        }
      }
  });
  return out;
}

/// Elementwise C_v * (1 + d/nu)^-(nu+1). Monotone decreasing in d; zero
/// distance maps to C_v.
inline Tensor t2_map(Tape& tape, const Tensor& dist, T2Params p = {}) {
  if (!(p.nu > 0.0)) throw ConfigError("t2_map: nu must be positive");
  if (!(p.c_v > 0.0)) throw ConfigError("t2_map: c_v must be positive");
  Tensor out(dist.rows(), dist.cols());
  auto dv = dist.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    if (dv[i] < 0.0) throw ConfigError("t2_map: negative distance");
    ov[i] = p.c_v * std::exp(-(p.nu + 1.0) * std::log1p(dv[i] / p.nu));
  }
  check_finite(out, "t2_map");
  tape.record("t2_map", out, {dist}, [dist, out, p]() mutable {
    auto g = out.grad();
    auto dg = dist.grad();
    auto dv = dist.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < g.size(); ++i)
      dg[i] -= g[i] * ov[i] * (p.nu + 1.0) / (p.nu + dv[i]);
  });
  return out;
}

namespace detail {

inline void check_square_pair(const Tensor& s, const Tensor& e, const char* op) {
  if (s.rows() != e.rows() || s.cols() != e.cols() || e.rows() != e.cols())
    throw ShapeError(std::string(op) + ": target " + s.shape() + " vs " + e.shape());
}

inline double clamp_prob(double x) { return std::clamp(x, kProbClamp, 1.0 - kProbClamp); }

}  // namespace detail

/// -sum_{i != j} [S_ij log E_ij + (1 - S_ij) log(1 - E_ij)].
/// `target` is read as constants; gradients flow into `probs` only.
inline Tensor fuzzy_cross_entropy(Tape& tape, const Tensor& target, const Tensor& probs) {
  detail::check_square_pair(target, probs, "fuzzy_cross_entropy");
  const std::size_t m = probs.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double s = target(i, j);
      const double e = detail::clamp_prob(probs(i, j));
      loss -= s * std::log(e) + (1.0 - s) * std::log1p(-e);
    }
  Tensor out = Tensor::scalar(loss);
  check_finite(out, "fuzzy_cross_entropy");
  Tensor s_vals = target.detach();
  tape.record("fuzzy_cross_entropy", out, {probs}, [s_vals, probs, out, m]() mutable {
    const double g = out.grad()[0];
    auto pg = probs.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        const double s = s_vals(i, j);
        const double e = detail::clamp_prob(probs(i, j));
        pg[i * m + j] += g * (-s / e + (1.0 - s) / (1.0 - e));
      }
  });
  return out;
}

/// Attract-only baseline: -sum_{i != j} S_ij log E_ij.
inline Tensor normal_cross_entropy(Tape& tape, const Tensor& target, const Tensor& probs) {
  detail::check_square_pair(target, probs, "normal_cross_entropy");
  const std::size_t m = probs.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      loss -= target(i, j) * std::log(detail::clamp_prob(probs(i, j)));
    }
  Tensor out = Tensor::scalar(loss);
  check_finite(out, "normal_cross_entropy");
  Tensor s_vals = target.detach();
  tape.record("normal_cross_entropy", out, {probs}, [s_vals, probs, out, m]() mutable {
    const double g = out.grad()[0];
    auto pg = probs.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        pg[i * m + j] -= g * s_vals(i, j) / detail::clamp_prob(probs(i, j));
      }
  });
  return out;
}

/// Mean of the off-diagonal entries of a square matrix.
inline double off_diagonal_mean(const Tensor& p) {
  const std::size_t m = p.rows();
  if (m < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) s += p(i, j);
  return s / static_cast<double>(m * (m - 1));
}

}  // namespace skr
