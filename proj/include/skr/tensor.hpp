#pragma once

// Dense row-major matrices plus a dynamic tape for reverse-mode
// differentiation. A Tensor is a handle: copies share storage, so a backward
// closure can capture its inputs and outputs by value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skr/errors.hpp"

namespace skr {

namespace detail {

struct TensorStorage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
};

inline std::string shape_str(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << '[' << r << 'x' << c << ']';
  return os.str();
}

}  // namespace detail

class Tensor {
 public:
  Tensor() : Tensor(0, 0) {}

  Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false)
      : s_(std::make_shared<detail::TensorStorage>()) {
    s_->rows = rows;
    s_->cols = cols;
    s_->value.assign(rows * cols, 0.0);
    s_->grad.assign(rows * cols, 0.0);
    s_->requires_grad = requires_grad;
  }

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
         bool requires_grad = false)
      : s_(std::make_shared<detail::TensorStorage>()) {
    if (values.size() != rows * cols)
      throw ShapeError("Tensor: " + std::to_string(values.size()) +
                       " values for shape " + detail::shape_str(rows, cols));
    s_->rows = rows;
    s_->cols = cols;
    s_->value = std::move(values);
    s_->grad.assign(rows * cols, 0.0);
    s_->requires_grad = requires_grad;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(1, 1, std::vector<double>{v}, requires_grad);
  }

  std::size_t rows() const noexcept { return s_->rows; }
  std::size_t cols() const noexcept { return s_->cols; }
  std::size_t size() const noexcept { return s_->value.size(); }
  std::string shape() const { return detail::shape_str(rows(), cols()); }

  bool requires_grad() const noexcept { return s_->requires_grad; }
  void set_requires_grad(bool on) noexcept { s_->requires_grad = on; }

  double& operator()(std::size_t r, std::size_t c) { return s_->value[r * s_->cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return s_->value[r * s_->cols + c]; }

  std::span<double> values() noexcept { return s_->value; }
  std::span<const double> values() const noexcept { return s_->value; }
  /// Gradient accumulator. Writable through const handles: backward rules
  /// capture their inputs by value and accumulate into shared storage.
  std::span<double> grad() const noexcept { return s_->grad; }

  std::span<const double> row(std::size_t r) const noexcept {
    return values().subspan(r * cols(), cols());
  }

  double item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape());
    return s_->value[0];
  }

  void zero_grad() const noexcept { std::fill(s_->grad.begin(), s_->grad.end(), 0.0); }

  /// Deep copy of the values; the result does not require gradients.
  Tensor detach() const { return Tensor(rows(), cols(), s_->value, false); }

  bool same_storage(const Tensor& other) const noexcept { return s_ == other.s_; }

 private:
  std::shared_ptr<detail::TensorStorage> s_;
};

/// Ordered record of the differentiable operations executed in one forward
/// pass. Rebuilt per training step.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string_view op;
    Tensor output;
    BackwardFn backward;
  };

  /// Registers `out` as produced by `op` from `inputs`. The output requires
  /// gradients iff some input does; otherwise nothing is recorded.
  void record(std::string_view op, Tensor& out, std::span<const Tensor> inputs,
              BackwardFn backward) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    out.set_requires_grad(any);
    if (any) entries_.push_back(Entry{op, out, std::move(backward)});
  }

  void record(std::string_view op, Tensor& out, std::initializer_list<Tensor> inputs,
              BackwardFn backward) {
    record(op, out, std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
  }

  /// Accumulates d(loss)/d(t) into t.grad() for every tensor on the path.
  void backward(Tensor loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw ShapeError("backward: loss must be 1x1, got " + loss.shape());
    if (consumed_) throw std::logic_error("backward: tape already consumed");
    bool found = false;
    for (const auto& e : entries_) found = found || e.output.same_storage(loss);
    if (!found) throw std::logic_error("backward: loss was not produced on this tape");
    consumed_ = true;
    loss.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void clear() {
    entries_.clear();
    consumed_ = false;
  }

 private:
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

/// Throws NumericError if any entry of `t` is NaN or infinite.
inline void check_finite(const Tensor& t, std::string_view op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
  }
}

/// Graph membership of stacked node rows. Node rows of segment g occupy the
/// contiguous range [begin(g), end(g)).
class Segments {
 public:
  Segments() = default;

  static Segments from_counts(std::span<const std::size_t> counts) {
    Segments s;
    s.offsets_.reserve(counts.size() + 1);
    s.offsets_.push_back(0);
    for (auto c : counts) s.offsets_.push_back(s.offsets_.back() + c);
    return s;
  }

  /// From a per-node membership vector, which must be sorted ascending and
  /// cover 0..G-1.
  static Segments from_membership(std::span<const std::size_t> membership) {
    Segments s;
    s.offsets_.push_back(0);
    std::size_t current = 0;
    for (std::size_t i = 0; i < membership.size(); ++i) {
      const auto g = membership[i];
      if (g < current || g > current + 1 || (i == 0 && g != 0))
        throw ShapeError("Segments: membership must be ascending and contiguous from 0");
      if (g == current + 1) {
        s.offsets_.push_back(i);
        current = g;
      }
    }
    if (!membership.empty()) s.offsets_.push_back(membership.size());
    return s;
  }

  std::size_t num_segments() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t begin(std::size_t g) const { return offsets_[g]; }
  std::size_t end(std::size_t g) const { return offsets_[g + 1]; }
  std::size_t count(std::size_t g) const { return offsets_[g + 1] - offsets_[g]; }

 private:
  std::vector<std::size_t> offsets_;
};

// ---------------------------------------------------------------------------
// Operations

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape() + " x " + b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
    }
  }
  check_finite(out, "matmul");
  tape.record("matmul", out, {a, b}, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ag = a.grad();
      auto bv = b.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          ag[i * k + p] += s;
        }
    }
    if (b.requires_grad()) {
      auto bg = b.grad();
      auto av = a.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) bg[p * n + j] += aip * g[i * n + j];
        }
    }
  });
  return out;
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add: " + a.shape() + " + " + b.shape());
  Tensor out(a.rows(), a.cols());
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = a.values()[i] + b.values()[i];
  check_finite(out, "add");
  tape.record("add", out, {a, b}, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
    if (b.requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i];
  });
  return out;
}

/// Adds a 1 x n bias row to every row of `a`.
inline Tensor add_bias(Tape& tape, const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw ShapeError("add_bias: " + a.shape() + " + " + bias.shape());
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) + bias(0, j);
  check_finite(out, "add_bias");
  tape.record("add_bias", out, {a, bias}, [a, bias, out, m, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
    if (bias.requires_grad())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bias.grad()[j] += g[i * n + j];
  });
  return out;
}

/// max(0, x); the subgradient at exactly 0 is 0.
inline Tensor relu(Tape& tape, const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
  check_finite(out, "relu");
  tape.record("relu", out, {a}, [a, out]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ag[i] += g[i];
  });
  return out;
}

inline Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = c * a.values()[i];
  check_finite(out, "scale");
  tape.record("scale", out, {a}, [a, out, c]() mutable {
    auto g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += c * g[i];
  });
  return out;
}

/// Elementwise product.
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("mul: " + a.shape() + " * " + b.shape());
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = a.values()[i] * b.values()[i];
  check_finite(out, "mul");
  tape.record("mul", out, {a, b}, [a, b, out]() mutable {
    auto g = out.grad();
    const bool same = a.same_storage(b);
    if (a.requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * b.values()[i];
    if (b.requires_grad() && !same)
      for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i] * a.values()[i];
    if (same && a.requires_grad())
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * a.values()[i];
  });
  return out;
}

/// Sum of all entries as a 1x1 tensor.
inline Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s);
  check_finite(out, "sum");
  tape.record("sum", out, {a}, [a, out]() mutable {
    const double g = out.grad()[0];
    for (auto& ag : a.grad()) ag += g;
  });
  return out;
}

/// Horizontal concatenation of same-height blocks.
inline Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeError("concat_cols: row mismatch " + p.shape());
    n += p.cols();
  }
  Tensor out(m, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p(i, j);
    off += p.cols();
  }
  std::vector<Tensor> captured = parts;
  tape.record("concat_cols", out, parts, [captured, out, m, n]() mutable {
    auto g = out.grad();
    std::size_t off = 0;
    for (auto& p : captured) {
      if (p.requires_grad()) {
        auto pg = p.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p.cols(); ++j) pg[i * p.cols() + j] += g[i * n + off + j];
      }
      off += p.cols();
    }
  });
  return out;
}

/// Row g of the result is the mean of the node rows in segment g.
inline Tensor segment_mean(Tape& tape, const Tensor& a, const Segments& seg) {
  if (seg.num_nodes() != a.rows())
    throw ShapeError("segment_mean: segments cover " + std::to_string(seg.num_nodes()) +
                     " rows, input is " + a.shape());
  const std::size_t h = a.cols();
  Tensor out(seg.num_segments(), h);
  for (std::size_t g = 0; g < seg.num_segments(); ++g) {
    if (seg.count(g) == 0)
      throw ShapeError("segment_mean: segment " + std::to_string(g) + " is empty");
    const double inv = 1.0 / static_cast<double>(seg.count(g));
    for (std::size_t r = seg.begin(g); r < seg.end(g); ++r)
      for (std::size_t c = 0; c < h; ++c) out(g, c) += a(r, c);
    for (std::size_t c = 0; c < h; ++c) out(g, c) *= inv;
  }
  check_finite(out, "segment_mean");
  tape.record("segment_mean", out, {a}, [a, seg, out, h]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t s = 0; s < seg.num_segments(); ++s) {
      const double inv = 1.0 / static_cast<double>(seg.count(s));
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r)
        for (std::size_t c = 0; c < h; ++c) ag[r * h + c] += inv * g[s * h + c];
    }
  });
  return out;
}

/// Row g of the result is sum_j w_j * a[j] over the rows j of segment g.
/// The weights are constants: no gradient flows into them.
inline Tensor weighted_segment_sum(Tape& tape, const Tensor& a, const Segments& seg,
                                   std::span<const double> weights) {
  if (seg.num_nodes() != a.rows() || weights.size() != a.rows())
    throw ShapeError("weighted_segment_sum: " + std::to_string(weights.size()) +
                     " weights / " + std::to_string(seg.num_nodes()) +
                     " segment rows for input " + a.shape());
  const std::size_t h = a.cols();
  Tensor out(seg.num_segments(), h);
  for (std::size_t g = 0; g < seg.num_segments(); ++g) {
    if (seg.count(g) == 0)
      throw ShapeError("weighted_segment_sum: segment " + std::to_string(g) + " is empty");
    for (std::size_t r = seg.begin(g); r < seg.end(g); ++r)
      for (std::size_t c = 0; c < h; ++c) out(g, c) += weights[r] * a(r, c);
  }
  check_finite(out, "weighted_segment_sum");
  std::vector<double> w(weights.begin(), weights.end());
  tape.record("weighted_segment_sum", out, {a}, [a, seg, w, out, h]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t s = 0; s < seg.num_segments(); ++s)
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r)
        for (std::size_t c = 0; c < h; ++c) ag[r * h + c] += w[r] * g[s * h + c];
  });
  return out;
}

}  // namespace skr
