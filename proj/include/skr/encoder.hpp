#pragma once

// GIN message passing (epsilon fixed at 0) with a two-layer ReLU MLP per
// layer. Node representations concatenate the outputs of all layers; their
// per-graph mean is the semantic representation f^S. A two-layer projection
// head maps f^S to the embedding f^E.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "skr/errors.hpp"
#include "skr/graph.hpp"
#include "skr/pooling.hpp"
#include "skr/rng.hpp"
#include "skr/tensor.hpp"

namespace skr {

/// x W + b with W [in x out] and b [1 x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out)
      : weight(in, out, true), bias(1, out, true) {}

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)); zero bias.
  static Linear glorot(std::size_t in, std::size_t out, Rng& rng) {
    Linear l(in, out);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : l.weight.values()) w = rng.uniform(-bound, bound);
    return l;
  }

  Tensor forward(Tape& tape, const Tensor& x) const {
    return add_bias(tape, matmul(tape, x, weight), bias);
  }
};

struct GinLayerParams {
  Linear first;
  Linear second;
  double epsilon = 0.0;
};

struct GinParams {
  std::vector<GinLayerParams> layers;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  std::size_t semantic_dim() const noexcept { return layers.size() * hidden_dim; }
};

struct HeadParams {
  Linear first;   // h_S -> h_S, ReLU
  Linear second;  // h_S -> d_out
};

struct ModelShape {
  std::size_t input_dim = 0;
  std::size_t num_layers = 4;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 128;

  bool operator==(const ModelShape&) const = default;
};

struct ModelParams {
  GinParams gin;
  HeadParams head;

  ModelShape shape() const {
    return {gin.input_dim, gin.layers.size(), gin.hidden_dim, head.second.weight.cols()};
  }

  /// Every parameter tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t k = 0; k < gin.layers.size(); ++k) {
      const auto p = "gin." + std::to_string(k) + ".";
      out.emplace_back(p + "w1", gin.layers[k].first.weight);
      out.emplace_back(p + "b1", gin.layers[k].first.bias);
      out.emplace_back(p + "w2", gin.layers[k].second.weight);
      out.emplace_back(p + "b2", gin.layers[k].second.bias);
    }
    out.emplace_back("head.w1", head.first.weight);
    out.emplace_back("head.b1", head.first.bias);
    out.emplace_back("head.w2", head.second.weight);
    out.emplace_back("head.b2", head.second.bias);
    return out;
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_tensors()) out.push_back(t);
    return out;
  }

  /// Deep copy: the result shares no storage with *this.
  ModelParams clone() const {
    ModelParams c = *this;
    auto copy = [](Linear& l) {
      l.weight = Tensor(l.weight.rows(), l.weight.cols(),
                        std::vector<double>(l.weight.values().begin(), l.weight.values().end()), true);
      l.bias = Tensor(l.bias.rows(), l.bias.cols(),
                      std::vector<double>(l.bias.values().begin(), l.bias.values().end()), true);
    };
    for (auto& layer : c.gin.layers) {
      copy(layer.first);
      copy(layer.second);
    }
    copy(c.head.first);
    copy(c.head.second);
    return c;
  }
};

/// Freshly initialized parameters; deterministic in `rng`.
inline ModelParams init_model(const ModelShape& s, Rng& rng) {
  if (s.input_dim == 0 || s.num_layers == 0 || s.hidden_dim == 0 || s.embed_dim == 0)
    throw ConfigError("model dimensions must be positive");
  ModelParams p;
  p.gin.input_dim = s.input_dim;
  p.gin.hidden_dim = s.hidden_dim;
  for (std::size_t k = 0; k < s.num_layers; ++k) {
    const std::size_t in = k == 0 ? s.input_dim : s.hidden_dim;
    GinLayerParams layer;
    layer.first = Linear::glorot(in, s.hidden_dim, rng);
    layer.second = Linear::glorot(s.hidden_dim, s.hidden_dim, rng);
    p.gin.layers.push_back(std::move(layer));
  }
  const std::size_t hs = p.gin.semantic_dim();
  p.head.first = Linear::glorot(hs, hs, rng);
  p.head.second = Linear::glorot(hs, s.embed_dim, rng);
  return p;
}

/// Several graphs stacked into one disjoint union.
struct GraphBatch {
  Tensor features;                      // [total nodes x d_in]
  std::vector<Edge> edges;              // global node indices
  Segments segments;
  std::vector<std::size_t> graph_ids;   // dataset index of each graph
};

inline GraphBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  GraphBatch b;
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (auto i : indices) {
    counts.push_back(ds.graphs.at(i).num_nodes);
    total += ds.graphs[i].num_nodes;
  }
  const std::size_t d = ds.feature_dim;
  b.features = Tensor(total, d);
  std::size_t base = 0;
  for (auto i : indices) {
    const auto& g = ds.graphs[i];
    std::copy(g.features.begin(), g.features.end(),
              b.features.values().begin() + static_cast<std::ptrdiff_t>(base * d));
    for (const auto& e : g.edges) b.edges.push_back(Edge{base + e.u, base + e.v});
    base += g.num_nodes;
  }
  b.segments = Segments::from_counts(counts);
  b.graph_ids.assign(indices.begin(), indices.end());
  return b;
}

inline GraphBatch make_batch(const Dataset& ds) {
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(ds, all);
}

/// out[v] = sum of h[u] over neighbours u of v (symmetric adjacency).
inline Tensor neighbor_sum(Tape& tape, const Tensor& h, const std::vector<Edge>& edges) {
  const std::size_t n = h.rows(), d = h.cols();
  for (const auto& e : edges)
    if (e.u >= n || e.v >= n) throw ShapeError("neighbor_sum: edge endpoint out of range");
  Tensor out(n, d);
  auto hv = h.values();
  auto ov = out.values();
  for (const auto& e : edges)
    for (std::size_t c = 0; c < d; ++c) {
      ov[e.u * d + c] += hv[e.v * d + c];
      ov[e.v * d + c] += hv[e.u * d + c];
    }
  check_finite(out, "neighbor_sum");
  tape.record("neighbor_sum", out, {h}, [h, out, edges, d]() mutable {
    auto g = out.grad();
    auto hg = h.grad();
    for (const auto& e : edges)
      for (std::size_t c = 0; c < d; ++c) {
        hg[e.v * d + c] += g[e.u * d + c];
        hg[e.u * d + c] += g[e.v * d + c];
      }
  });
  return out;
}

/// MLP((1 + eps) H + A H) with MLP = Linear, ReLU, Linear, ReLU.
inline Tensor gin_layer_forward(Tape& tape, const Tensor& h, const std::vector<Edge>& edges,
                                const GinLayerParams& p) {
  if (h.cols() != p.first.weight.rows())
    throw ShapeError("gin_layer_forward: input " + h.shape() + " vs weight " +
                     p.first.weight.shape());
  Tensor self = p.epsilon == 0.0 ? h : scale(tape, h, 1.0 + p.epsilon);
  Tensor agg = add(tape, self, neighbor_sum(tape, h, edges));
  Tensor z = relu(tape, p.first.forward(tape, agg));
  return relu(tape, p.second.forward(tape, z));
}

struct SemanticBatch {
  Tensor node_reps;   // [N x K*h], layer outputs concatenated
  Segments segments;
  Tensor graph_reps;  // f^S, [G x K*h]
};

inline SemanticBatch encode_semantic(Tape& tape, const GraphBatch& batch, const GinParams& gin) {
  if (batch.segments.num_segments() == 0) throw ConfigError("encode_semantic: empty batch");
  if (batch.features.cols() != gin.input_dim)
    throw ShapeError("encode_semantic: features have " + std::to_string(batch.features.cols()) +
                     " columns, encoder expects " + std::to_string(gin.input_dim));
  std::vector<Tensor> outputs;
  Tensor h = batch.features;
  for (const auto& layer : gin.layers) {
    h = gin_layer_forward(tape, h, batch.edges, layer);
    outputs.push_back(h);
  }
  SemanticBatch sb;
  sb.node_reps = concat_cols(tape, outputs);
  sb.segments = batch.segments;
  sb.graph_reps = mean_pool(tape, sb.node_reps, sb.segments);
  return sb;
}

/// Row-wise h_phi: Linear, ReLU, Linear.
inline Tensor project_embedding(Tape& tape, const Tensor& f, const HeadParams& head) {
  if (f.cols() != head.first.weight.rows())
    throw ShapeError("project_embedding: input " + f.shape() + " vs head " +
                     head.first.weight.shape());
  return head.second.forward(tape, relu(tape, head.first.forward(tape, f)));
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text header, then a binary payload:
//   SKR-CHECKPOINT 1
//   meta <key> <value>          (any number)
//   tensor <name> <rows> <cols> (one per parameter, payload order)
//   end
//   for each tensor: uint64 count, then count float64 values, little-endian

using CheckpointMeta = std::map<std::string, std::string>;

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw CheckpointError("checkpoint payload truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                            const CheckpointMeta& meta = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const auto shape = params.shape();
  CheckpointMeta all = meta;
  all["input_dim"] = std::to_string(shape.input_dim);
  all["num_layers"] = std::to_string(shape.num_layers);
  all["hidden_dim"] = std::to_string(shape.hidden_dim);
  all["embed_dim"] = std::to_string(shape.embed_dim);
  out << "SKR-CHECKPOINT 1\n";
  for (const auto& [k, v] : all) out << "meta " << k << ' ' << v << '\n';
  const auto named = params.named_tensors();
  for (const auto& [name, t] : named) out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  out << "end\n";
  for (const auto& [name, t] : named) {
    detail::put_u64(out, t.size());
    for (double v : t.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "SKR-CHECKPOINT 1")
    throw CheckpointError(path.string() + ": not a checkpoint");
  Checkpoint ck;
  struct Entry {
    std::string name;
    std::size_t rows, cols;
  };
  std::vector<Entry> entries;
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      ck.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      if (!(ls >> e.name >> e.rows >> e.cols))
        throw CheckpointError(path.string() + ": bad tensor line '" + line + "'");
      entries.push_back(e);
    } else {
      throw CheckpointError(path.string() + ": unexpected header line '" + line + "'");
    }
  }
  if (line != "end") throw CheckpointError(path.string() + ": header not terminated");

  auto dim = [&](const char* key) -> std::size_t {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw CheckpointError(path.string() + ": missing meta " + key);
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  ModelShape shape{dim("input_dim"), dim("num_layers"), dim("hidden_dim"), dim("embed_dim")};
  Rng unused(0);
  ck.params = init_model(shape, unused);
  const auto named = ck.params.named_tensors();
  if (named.size() != entries.size())
    throw CheckpointError(path.string() + ": expected " + std::to_string(named.size()) +
                          " tensors, found " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto [name, t] = named[i];
    const auto& e = entries[i];
    if (e.name != name || e.rows != t.rows() || e.cols != t.cols())
      throw CheckpointError(path.string() + ": tensor '" + e.name + "' does not match " + name +
                            " " + t.shape());
    const auto count = detail::get_u64(in);
    if (count != t.size()) throw CheckpointError(path.string() + ": bad length for " + name);
    for (auto& v : t.values()) v = std::bit_cast<double>(detail::get_u64(in));
  }
  return ck;
}

}  // namespace skr
