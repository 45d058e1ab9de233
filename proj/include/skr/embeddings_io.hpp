#pragma once

// Embedding table CSV: header graph_id,label,e0,...,e{d-1}; one row per graph
// in dataset order. Values are written with 17 significant digits so that a
// reload is exact.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "skr/errors.hpp"
#include "skr/eval.hpp"
#include "skr/graph.hpp"
#include "skr/trainer.hpp"

namespace skr {

struct EmbeddingTable {
  std::vector<long long> graph_ids;
  std::vector<int> labels;
  Matrix values;
};

inline void write_embeddings_csv(std::ostream& out, const Embeddings& e) {
  out << "graph_id,label";
  for (std::size_t c = 0; c < e.values.cols(); ++c) out << ",e" << c;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < e.values.rows(); ++r) {
    out << r << ',' << e.labels[r];
    for (std::size_t c = 0; c < e.values.cols(); ++c) out << ',' << e.values(r, c);
    out << '\n';
  }
}

inline Matrix to_matrix(const Tensor& t) {
  return Matrix(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()));
}

inline EmbeddingTable read_embeddings_csv(const std::filesystem::path& path) {
  const auto file = detail::read_lines(path, true);
  if (file.lines.empty()) throw ParseError(path.string() + ": empty file");
  const auto header = detail::split_fields(detail::trim(file.lines[0]));
  if (header.size() < 3 || header[0] != "graph_id" || header[1] != "label")
    throw ParseError(path.string() + ": header must start with graph_id,label,e0");
  const std::size_t d = header.size() - 2;
  for (std::size_t c = 0; c < d; ++c)
    if (header[c + 2] != "e" + std::to_string(c))
      throw ParseError(path.string() + ": unexpected column '" + std::string(header[c + 2]) + "'");
  EmbeddingTable t;
  std::vector<double> vals;
  for (std::size_t i = 1; i < file.lines.size(); ++i) {
    const auto fields = detail::split_fields(detail::trim(file.lines[i]));
    if (fields.size() != d + 2)
      throw ParseError(detail::where(file, i) + ": expected " + std::to_string(d + 2) + " fields");
    t.graph_ids.push_back(detail::parse_int<long long>(fields[0], file, i));
    t.labels.push_back(detail::parse_int<int>(fields[1], file, i));
    for (std::size_t c = 0; c < d; ++c) vals.push_back(detail::parse_real(fields[c + 2], file, i));
  }
  t.values = Matrix(t.labels.size(), d, std::move(vals));
  return t;
}

}  // namespace skr
