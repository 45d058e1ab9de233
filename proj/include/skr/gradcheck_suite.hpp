#pragma once

// Finite-difference checks for every differentiable operation and for the
// composed training loss. Each case is run over several seeds; non-scalar
// outputs are reduced with a fixed random weighting so every output entry
// contributes to the checked gradient.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skr/encoder.hpp"
#include "skr/grad_check.hpp"
#include "skr/knowledge.hpp"
#include "skr/pooling.hpp"
#include "skr/synthetic.hpp"
#include "skr/tensor.hpp"
#include "skr/trainer.hpp"

namespace skr {

struct GradCheckCase {
  std::string name;
  std::function<double(std::uint64_t seed)> run;  // max relative error
};

struct GradCheckLine {
  std::string name;
  double max_error = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

namespace gc {

inline Tensor randn(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

inline Tensor uniform(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  Tensor t(r, c);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Random values bounded away from the ReLU kink.
inline Tensor off_kink(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (auto& v : t.values()) {
    const double m = rng.uniform(0.1, 2.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

/// sum(out * w) as a scalar.
inline Tensor weighted_sum(Tape& tape, const Tensor& out, const Tensor& w) {
  return sum(tape, mul(tape, out, w));
}

/// A case whose forward maps inputs to some tensor, reduced by a random
/// weighting generated from the seed.
inline GradCheckCase reduce_case(std::string name,
                                 std::function<std::vector<Tensor>(Rng&)> make_inputs,
                                 std::function<Tensor(Tape&, const std::vector<Tensor>&)> forward) {
  return {name, [make_inputs, forward](std::uint64_t seed) {
            Rng rng(seed, {0x9c4ULL});
            auto inputs = make_inputs(rng);
            Tensor weights;
            {
              Tape probe;
              const auto shape = forward(probe, inputs);
              weights = randn(shape.rows(), shape.cols(), rng);
            }
            return grad_check(
                [&](Tape& tape, const std::vector<Tensor>& in) {
                  return weighted_sum(tape, forward(tape, in), weights);
                },
                inputs);
          }};
}

/// scale() with a deliberately wrong backward rule; negative control only.
inline Tensor faulty_scale(Tape& tape, const Tensor& a, double c) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = c * a.values()[i];
  tape.record("faulty_scale", out, {a}, [a, out, c]() mutable {
    auto g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += 2.0 * c * g[i];
  });
  return out;
}

/// Fresh small model with nonzero biases, so no pre-activation sits exactly
/// on a ReLU kink (zero biases make all-dead rows map to exactly 0).
inline ModelParams generic_model(const ModelShape& shape, Rng& rng) {
  auto p = init_model(shape, rng);
  for (auto& [name, t] : p.named_tensors())
    if (t.rows() == 1)
      for (auto& v : t.values()) v = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace gc

/// The standard suite. With `include_faulty` a broken op is appended.
inline std::vector<GradCheckCase> gradcheck_cases(bool include_faulty = false) {
  using gc::reduce_case;
  using In = std::vector<Tensor>;
  std::vector<GradCheckCase> cases;

  cases.push_back(reduce_case(
      "matmul", [](Rng& r) { return In{gc::randn(3, 4, r), gc::randn(4, 2, r)}; },
      [](Tape& t, const In& x) { return matmul(t, x[0], x[1]); }));
  cases.push_back(reduce_case(
      "add", [](Rng& r) { return In{gc::randn(3, 2, r), gc::randn(3, 2, r)}; },
      [](Tape& t, const In& x) { return add(t, x[0], x[1]); }));
  cases.push_back(reduce_case(
      "add_bias", [](Rng& r) { return In{gc::randn(4, 3, r), gc::randn(1, 3, r)}; },
      [](Tape& t, const In& x) { return add_bias(t, x[0], x[1]); }));
  cases.push_back(reduce_case(
      "relu", [](Rng& r) { return In{gc::off_kink(4, 3, r)}; },
      [](Tape& t, const In& x) { return relu(t, x[0]); }));
  cases.push_back(reduce_case(
      "scale", [](Rng& r) { return In{gc::randn(2, 3, r)}; },
      [](Tape& t, const In& x) { return scale(t, x[0], -1.7); }));
  cases.push_back(reduce_case(
      "mul", [](Rng& r) { return In{gc::randn(3, 3, r), gc::randn(3, 3, r)}; },
      [](Tape& t, const In& x) { return mul(t, x[0], x[1]); }));
  cases.push_back(reduce_case(
      "sum", [](Rng& r) { return In{gc::randn(2, 5, r)}; },
      [](Tape& t, const In& x) { return sum(t, x[0]); }));
  cases.push_back(reduce_case(
      "concat_cols", [](Rng& r) { return In{gc::randn(3, 2, r), gc::randn(3, 3, r)}; },
      [](Tape& t, const In& x) { return concat_cols(t, {x[0], x[1]}); }));

  const std::vector<std::size_t> counts{2, 3, 1};
  const auto seg = Segments::from_counts(counts);
  cases.push_back(reduce_case(
      "segment_mean", [](Rng& r) { return In{gc::randn(6, 3, r)}; },
      [seg](Tape& t, const In& x) { return segment_mean(t, x[0], seg); }));
  cases.push_back(reduce_case(
      "weighted_segment_sum", [](Rng& r) { return In{gc::randn(6, 3, r)}; },
      [seg](Tape& t, const In& x) {
        Rng rng(7);
        const auto w = sample_pool_weights(seg, 2.0, [&](std::size_t) { return Rng(rng()); });
        return weighted_segment_sum(t, x[0], seg, w);
      }));

  const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {0, 3}, {3, 4}};
  cases.push_back(reduce_case(
      "neighbor_sum", [](Rng& r) { return In{gc::randn(5, 3, r)}; },
      [edges](Tape& t, const In& x) { return neighbor_sum(t, x[0], edges); }));
  cases.push_back(reduce_case(
      "gin_layer",
      [](Rng& r) {
        auto l1 = Linear::glorot(3, 4, r), l2 = Linear::glorot(4, 4, r);
        for (auto* b : {&l1.bias, &l2.bias})
          for (auto& v : b->values()) v = r.uniform(-0.5, 0.5);
        return In{gc::randn(5, 3, r), l1.weight, l1.bias, l2.weight, l2.bias};
      },
      [edges](Tape& t, const In& x) {
        GinLayerParams p;
        p.first.weight = x[1];
        p.first.bias = x[2];
        p.second.weight = x[3];
        p.second.bias = x[4];
        return gin_layer_forward(t, x[0], edges, p);
      }));
  cases.push_back(reduce_case(
      "pairwise_distances", [](Rng& r) { return In{gc::randn(5, 4, r)}; },
      [](Tape& t, const In& x) { return pairwise_distances(t, x[0]); }));
  cases.push_back(reduce_case(
      "t2_map", [](Rng& r) { return In{gc::uniform(4, 4, r, 0.0, 3.0)}; },
      [](Tape& t, const In& x) { return t2_map(t, x[0], {5.0, 1.0}); }));
  cases.push_back(reduce_case(
      "t2_map(pairwise_distances)", [](Rng& r) { return In{gc::randn(5, 3, r, 0.5)}; },
      [](Tape& t, const In& x) { return t2_map(t, pairwise_distances(t, x[0]), {1000.0, 1.0}); }));

  const auto target_for = [](Rng& r, std::size_t m) {
    auto s = gc::uniform(m, m, r, 0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
    return s;
  };
  cases.push_back({"fuzzy_cross_entropy", [target_for](std::uint64_t seed) {
                     Rng r(seed, {0xfceULL});
                     const auto s = target_for(r, 5);
                     return grad_check(
                         [s](Tape& t, const In& x) { return fuzzy_cross_entropy(t, s, x[0]); },
                         {gc::uniform(5, 5, r, 0.05, 0.95)});
                   }});
  cases.push_back({"normal_cross_entropy", [target_for](std::uint64_t seed) {
                     Rng r(seed, {0x0ceULL});
                     const auto s = target_for(r, 5);
                     return grad_check(
                         [s](Tape& t, const In& x) { return normal_cross_entropy(t, s, x[0]); },
                         {gc::uniform(5, 5, r, 0.05, 0.95)});
                   }});

  // Gradient of a scalar of f^E with respect to every GIN and head tensor.
  cases.push_back({"encoder+head", [](std::uint64_t seed) {
                     const auto ds = make_random_dataset(3, 2, 5, 3, 0.5, seed);
                     Rng r(seed, {0xe6cULL});
                     const auto params = gc::generic_model({3, 2, 4, 3}, r);
                     const auto batch = make_batch(ds);
                     const auto w = gc::randn(3, 3, r);
                     return grad_check(
                         [&](Tape& t, const In& x) {
                           (void)x;
                           const auto sb = encode_semantic(t, batch, params.gin);
                           return gc::weighted_sum(t, project_embedding(t, sb.graph_reps, params.head), w);
                         },
                         params.tensors());
                   }});

  // The training objective with its semantic target held fixed.
  cases.push_back({"skr_loss", [](std::uint64_t seed) {
                     const auto ds = make_random_dataset(5, 2, 6, 3, 0.4, seed);
                     Rng r(seed, {0x5c7ULL});
                     const auto params = gc::generic_model({3, 2, 4, 3}, r);
                     TrainConfig cfg;
                     cfg.seed = seed;
                     cfg.nu = 1000.0;
                     const auto batch = make_batch(ds);
                     Tensor target;
                     {
                       Tape t;
                       target = semantic_target(encode_semantic(t, batch, params.gin), batch.graph_ids,
                                                cfg, 0);
                     }
                     return grad_check(
                         [&](Tape& t, const In& x) {
                           (void)x;
                           const auto sb = encode_semantic(t, batch, params.gin);
                           return fuzzy_cross_entropy(t, target,
                                                      embedding_knowledge(t, sb, params.head, cfg.t2()));
                         },
                         params.tensors());
                   }});

  if (include_faulty) {
    cases.push_back(reduce_case(
        "faulty_scale", [](Rng& r) { return In{gc::randn(2, 2, r)}; },
        [](Tape& t, const In& x) { return gc::faulty_scale(t, x[0], 3.0); }));
  }
  return cases;
}

/// Runs every case over `seeds` seeds and reports the worst error per case.
inline std::vector<GradCheckLine> run_gradcheck_suite(bool include_faulty = false,
                                                      std::size_t seeds = 5) {
  std::vector<GradCheckLine> lines;
  for (const auto& c : gradcheck_cases(include_faulty)) {
    GradCheckLine line{c.name, 0.0};
    for (std::uint64_t s = 0; s < seeds; ++s) line.max_error = std::max(line.max_error, c.run(s + 1));
    lines.push_back(line);
  }
  return lines;
}

}  // namespace skr
