#pragma once

// Graph and dataset types, plus reading and writing the TU benchmark text
// layout:
//   {name}_A.txt                 one "u, v" line per directed edge, 1-based
//   {name}_graph_indicator.txt   graph id (1-based) of each node
//   {name}_graph_labels.txt      class value of each graph
//   {name}_node_labels.txt       optional, one integer per node
//   {name}_node_attributes.txt   optional, comma-separated reals per node

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "skr/errors.hpp"

namespace skr {

/// Undirected edge stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  auto operator<=>(const Edge&) const = default;
};

struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;        // canonical: u < v, sorted, unique
  std::vector<double> features;   // row-major num_nodes x feature_dim
  std::size_t feature_dim = 0;
  int label = 0;

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(num_nodes, 0);
    for (const auto& e : edges) {
      ++d[e.u];
      ++d[e.v];
    }
    return d;
  }

  bool operator==(const Graph&) const = default;
};

struct ParseStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges_collapsed = 0;
  bool operator==(const ParseStats&) const = default;
};

/// Orients edges as u < v, sorts them, drops self-loops and collapses
/// duplicates, counting both in `stats`.
inline void canonicalize_edges(Graph& g, ParseStats& stats) {
  std::set<Edge> canon;
  for (auto e : g.edges) {
    if (e.u >= g.num_nodes || e.v >= g.num_nodes) throw ConfigError("edge endpoint out of range");
    if (e.u == e.v) {
      ++stats.self_loops_dropped;
      continue;
    }
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!canon.insert(e).second) ++stats.duplicate_edges_collapsed;
  }
  g.edges.assign(canon.begin(), canon.end());
}

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<long long> class_values;  // original label of each class id
  ParseStats stats;

  bool has_features() const noexcept { return feature_dim > 0; }
  std::size_t size() const noexcept { return graphs.size(); }

  std::vector<int> labels() const {
    std::vector<int> y;
    y.reserve(graphs.size());
    for (const auto& g : graphs) y.push_back(g.label);
    return y;
  }

  double average_nodes() const {
    double s = 0.0;
    for (const auto& g : graphs) s += static_cast<double>(g.num_nodes);
    return graphs.empty() ? 0.0 : s / static_cast<double>(graphs.size());
  }

  double average_edges() const {
    double s = 0.0;
    for (const auto& g : graphs) s += static_cast<double>(g.edges.size());
    return graphs.empty() ? 0.0 : s / static_cast<double>(graphs.size());
  }

  std::size_t max_degree() const {
    std::size_t m = 0;
    for (const auto& g : graphs)
      for (auto d : g.degrees()) m = std::max(m, d);
    return m;
  }

  /// Builds a dataset from already-constructed graphs: canonicalizes edges,
  /// remaps labels to 0..K-1 in ascending order and checks the invariants.
  static Dataset from_graphs(std::string name, std::vector<Graph> graphs) {
    Dataset ds;
    ds.name = std::move(name);
    if (graphs.empty()) throw ConfigError("dataset '" + ds.name + "' has no graphs");
    std::set<long long> values;
    for (const auto& g : graphs) values.insert(g.label);
    ds.class_values.assign(values.begin(), values.end());
    ds.feature_dim = graphs.front().feature_dim;
    for (auto& g : graphs) {
      if (g.num_nodes == 0) throw ConfigError("graph with zero nodes");
      if (g.feature_dim != ds.feature_dim)
        throw ConfigError("graphs disagree on feature dimension");
      if (g.features.size() != g.num_nodes * g.feature_dim)
        throw ConfigError("feature matrix does not match node count");
      canonicalize_edges(g, ds.stats);
      g.label = static_cast<int>(
          std::lower_bound(ds.class_values.begin(), ds.class_values.end(),
                           static_cast<long long>(g.label)) -
          ds.class_values.begin());
    }
    ds.num_classes = ds.class_values.size();
    ds.graphs = std::move(graphs);
    if (ds.num_classes < 2)
      throw ConfigError("dataset '" + ds.name + "' has fewer than 2 classes");
    return ds;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct TextFile {
  std::string path;
  std::vector<std::string> lines;  // trailing empty lines removed
};

inline TextFile read_lines(const std::filesystem::path& path, bool mandatory) {
  TextFile tf{path.string(), {}};
  std::ifstream in(path);
  if (!in) {
    if (mandatory) throw ParseError("missing file: " + path.string());
    return tf;
  }
  std::string line;
  while (std::getline(in, line)) tf.lines.push_back(line);
  while (!tf.lines.empty() && trim(tf.lines.back()).empty()) tf.lines.pop_back();
  return tf;
}

inline std::string where(const TextFile& f, std::size_t line_index) {
  return f.path + ":" + std::to_string(line_index + 1);
}

template <typename Int>
Int parse_int(std::string_view field, const TextFile& f, std::size_t line_index) {
  Int v{};
  // from_chars rejects a leading '+', which TU files never use.
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [p, ec] = std::from_chars(first, last, v, 10);
  if (ec != std::errc() || p != last || field.empty())
    throw ParseError(where(f, line_index) + ": bad integer '" + std::string(field) + "'");
  return v;
}

inline double parse_real(std::string_view field, const TextFile& f, std::size_t line_index) {
  std::string s(field);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (s.empty() || pos != s.size())
    throw ParseError(where(f, line_index) + ": bad real '" + s + "'");
  return v;
}

}  // namespace detail

/// Parses a TU-format dataset from `root_dir`. Nodes are renumbered 0-based
/// per graph, reciprocal edge lines collapse to one undirected edge, and
/// self-loops are dropped (both counted in Dataset::stats). Node labels
/// become a one-hot block, followed by any continuous node attributes.
/// A dataset with neither has feature_dim 0; see degree_onehot_features.
/// This level performs no dataset-wide checks, so a one-graph file parses.
struct ParsedGraphs {
  std::vector<Graph> graphs;  // canonical edges, raw labels
  ParseStats stats;
};

inline ParsedGraphs parse_tu_graphs(const std::filesystem::path& root_dir, const std::string& name) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root_dir))
    throw ParseError("dataset directory not found: " + root_dir.string());
  const auto file = [&](const char* suffix) { return root_dir / (name + suffix); };

  const auto indicator = detail::read_lines(file("_graph_indicator.txt"), true);
  const auto graph_labels = detail::read_lines(file("_graph_labels.txt"), true);
  const auto adjacency = detail::read_lines(file("_A.txt"), true);
  const auto node_labels = detail::read_lines(file("_node_labels.txt"), false);
  const auto node_attrs = detail::read_lines(file("_node_attributes.txt"), false);

  const std::size_t num_graphs = graph_labels.lines.size();
  const std::size_t num_nodes = indicator.lines.size();
  if (num_graphs == 0) throw ParseError(graph_labels.path + ": no graphs");

  std::vector<Graph> graphs(num_graphs);
  std::vector<std::size_t> graph_of(num_nodes), local_of(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const auto gid = detail::parse_int<long long>(detail::trim(indicator.lines[i]), indicator, i);
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs)
      throw ParseError(detail::where(indicator, i) + ": graph id " + std::to_string(gid) +
                       " out of range");
    const auto g = static_cast<std::size_t>(gid - 1);
    graph_of[i] = g;
    local_of[i] = graphs[g].num_nodes++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (graphs[g].num_nodes == 0)
      throw ParseError(indicator.path + ": graph " + std::to_string(g + 1) + " has no nodes");
    graphs[g].label = static_cast<int>(
        detail::parse_int<long long>(detail::trim(graph_labels.lines[g]), graph_labels, g));
  }

  for (std::size_t i = 0; i < adjacency.lines.size(); ++i) {
    const auto line = detail::trim(adjacency.lines[i]);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2)
      throw ParseError(detail::where(adjacency, i) + ": expected 'u, v'");
    const auto a = detail::parse_int<long long>(fields[0], adjacency, i);
    const auto b = detail::parse_int<long long>(fields[1], adjacency, i);
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > num_nodes ||
        static_cast<std::size_t>(b) > num_nodes)
      throw ParseError(detail::where(adjacency, i) + ": node index out of range");
    const auto u = static_cast<std::size_t>(a - 1), v = static_cast<std::size_t>(b - 1);
    if (graph_of[u] != graph_of[v])
      throw ParseError(detail::where(adjacency, i) + ": edge (" + std::to_string(a) + ", " +
                       std::to_string(b) + ") crosses graphs");
    graphs[graph_of[u]].edges.push_back(Edge{local_of[u], local_of[v]});
  }

  std::vector<std::vector<double>> rows(num_nodes);
  std::size_t dim = 0;
  if (!node_labels.lines.empty()) {
    if (node_labels.lines.size() != num_nodes)
      throw ParseError(node_labels.path + ": expected " + std::to_string(num_nodes) + " lines");
    std::vector<long long> value(num_nodes);
    std::set<long long> distinct;
    for (std::size_t i = 0; i < num_nodes; ++i) {
      // Some files carry extra comma-separated columns; the first is the label.
      const auto fields = detail::split_fields(detail::trim(node_labels.lines[i]));
      value[i] = detail::parse_int<long long>(fields[0], node_labels, i);
      distinct.insert(value[i]);
    }
    const std::vector<long long> sorted(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < num_nodes; ++i) {
      rows[i].assign(sorted.size(), 0.0);
      const auto k = std::lower_bound(sorted.begin(), sorted.end(), value[i]) - sorted.begin();
      rows[i][static_cast<std::size_t>(k)] = 1.0;
    }
    dim = sorted.size();
  }
  if (!node_attrs.lines.empty()) {
    if (node_attrs.lines.size() != num_nodes)
      throw ParseError(node_attrs.path + ": expected " + std::to_string(num_nodes) + " lines");
    std::size_t width = 0;
    for (std::size_t i = 0; i < num_nodes; ++i) {
      const auto fields = detail::split_fields(detail::trim(node_attrs.lines[i]));
      if (i == 0) width = fields.size();
      if (fields.size() != width)
        throw ParseError(detail::where(node_attrs, i) + ": inconsistent attribute count");
      for (auto f : fields) rows[i].push_back(detail::parse_real(f, node_attrs, i));
    }
    dim += width;
  }
  if (dim > 0) {
    for (std::size_t i = 0; i < num_nodes; ++i) {
      auto& g = graphs[graph_of[i]];
      if (g.features.empty()) g.features.assign(g.num_nodes * dim, 0.0);
      std::copy(rows[i].begin(), rows[i].end(), g.features.begin() + local_of[i] * dim);
    }
    for (auto& g : graphs) g.feature_dim = dim;
  }

  ParsedGraphs out;
  for (auto& g : graphs) canonicalize_edges(g, out.stats);
  out.graphs = std::move(graphs);
  return out;
}

/// parse_tu_graphs plus label remapping and the Dataset invariants.
inline Dataset parse_tu_dataset(const std::filesystem::path& root_dir, const std::string& name) {
  auto parsed = parse_tu_graphs(root_dir, name);
  try {
    auto ds = Dataset::from_graphs(name, std::move(parsed.graphs));
    ds.stats = parsed.stats;
    return ds;
  } catch (const ConfigError& e) {
    throw ParseError(root_dir.string() + ": " + e.what());
  }
}

/// Writes `ds` in TU layout. Features, if any, go to {name}_node_attributes.txt
/// at full precision, so re-parsing reproduces the dataset.
inline void write_tu_dataset(const Dataset& ds, const std::filesystem::path& root_dir) {
  std::filesystem::create_directories(root_dir);
  const auto open = [&](const char* suffix) {
    std::ofstream out(root_dir / (ds.name + suffix));
    if (!out) throw ParseError("cannot write " + (root_dir / (ds.name + suffix)).string());
    return out;
  };
  auto a = open("_A.txt");
  auto ind = open("_graph_indicator.txt");
  auto lab = open("_graph_labels.txt");
  std::size_t base = 1;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const auto& gr = ds.graphs[g];
    for (std::size_t i = 0; i < gr.num_nodes; ++i) ind << (g + 1) << '\n';
    for (const auto& e : gr.edges) {
      a << (base + e.u) << ", " << (base + e.v) << '\n';
      a << (base + e.v) << ", " << (base + e.u) << '\n';
    }
    lab << ds.class_values.at(static_cast<std::size_t>(gr.label)) << '\n';
    base += gr.num_nodes;
  }
  if (ds.has_features()) {
    auto attrs = open("_node_attributes.txt");
    attrs << std::setprecision(17);
    for (const auto& gr : ds.graphs)
      for (std::size_t i = 0; i < gr.num_nodes; ++i) {
        for (std::size_t c = 0; c < gr.feature_dim; ++c)
          attrs << (c ? ", " : "") << gr.features[i * gr.feature_dim + c];
        attrs << '\n';
      }
  }
}

/// Degree cap used for attribute-less datasets: observed maximum, at most 400.
inline std::size_t default_max_degree(const Dataset& ds) {
  return std::clamp<std::size_t>(ds.max_degree(), 1, 400);
}

/// Gives every node a one-hot of min(degree, max_degree), length
/// max_degree + 1. Datasets that already carry features are returned as-is.
inline Dataset degree_onehot_features(Dataset ds, std::size_t max_degree) {
  if (max_degree == 0) throw ConfigError("max_degree must be positive");
  if (ds.has_features()) return ds;
  const std::size_t dim = max_degree + 1;
  for (auto& g : ds.graphs) {
    const auto deg = g.degrees();
    g.feature_dim = dim;
    g.features.assign(g.num_nodes * dim, 0.0);
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      g.features[i * dim + std::min(deg[i], max_degree)] = 1.0;
  }
  ds.feature_dim = dim;
  return ds;
}

}  // namespace skr
