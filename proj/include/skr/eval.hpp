#pragma once

// Frozen-embedding evaluation: an L2-regularized hinge-loss linear SVM solved
// by dual coordinate descent, one-vs-rest for more than two classes, and
// repeated stratified k-fold cross-validation with the SVM cost C chosen from
// a grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skr/errors.hpp"
#include "skr/parallel.hpp"
#include "skr/rng.hpp"

namespace skr {

/// Plain row-major matrix for evaluation data.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != r * c) throw ShapeError("Matrix: value count does not match shape");
  }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  Matrix select(std::span<const std::size_t> idx) const {
    Matrix m(idx.size(), cols);
    for (std::size_t k = 0; k < idx.size(); ++k)
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[k] * cols), cols,
                  m.data.begin() + static_cast<std::ptrdiff_t>(k * cols));
    return m;
  }
};

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;

  double decision(std::span<const double> x) const {
    double s = b;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
    return s;
  }
};

struct SvmOptions {
  double tolerance = 1e-3;      // max |projected gradient|
  std::size_t max_passes = 1000;
  std::uint64_t seed = 1;       // coordinate order
};

struct SvmResult {
  LinearModel model;
  std::size_t passes = 0;
  std::vector<double> dual_objective;  // after each pass
};

/// Dual coordinate descent for min_w 1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i),
/// with the bias folded in as a constant-1 feature. Labels must be +-1.
inline SvmResult linear_svm_train(const Matrix& x, std::span<const int> y, double c,
                                  const SvmOptions& opt = {}) {
  const std::size_t n = x.rows, d = x.cols;
  if (y.size() != n) throw ShapeError("linear_svm_train: label count mismatch");
  if (n < 2) throw EvalError("linear_svm_train needs at least 2 samples");
  if (!(c > 0.0)) throw ConfigError("SVM cost C must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw EvalError("linear_svm_train: labels must be +1 or -1");
  }
  if (!pos || !neg) throw EvalError("linear_svm_train: both classes must be present");

  std::vector<double> w(d + 1, 0.0);  // last entry is the bias weight
  std::vector<double> alpha(n, 0.0), qdiag(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (double v : x.row(i)) s += v * v;
    qdiag[i] = s;
  }
  auto objective = [&]() {
    double ww = 0.0;
    for (double v : w) ww += v * v;
    return 0.5 * ww - std::accumulate(alpha.begin(), alpha.end(), 0.0);
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opt.seed);
  SvmResult res;
  for (res.passes = 0; res.passes < opt.max_passes;) {
    rng.shuffle(order.begin(), order.end());
    double worst = 0.0;
    for (auto i : order) {
      const auto xi = x.row(i);
      const double yi = y[i];
      double dot = w[d];
      for (std::size_t j = 0; j < d; ++j) dot += w[j] * xi[j];
      const double g = yi * dot - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= c) pg = std::max(g, 0.0);
      worst = std::max(worst, std::abs(pg));
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qdiag[i], 0.0, c);
      const double delta = (alpha[i] - old) * yi;
      if (delta == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) w[j] += delta * xi[j];
      w[d] += delta;
    }
    ++res.passes;
    res.dual_objective.push_back(objective());
    if (worst < opt.tolerance) break;
  }
  res.model.b = w[d];
  w.pop_back();
  res.model.w = std::move(w);
  return res;
}

/// argmax_k models[k].decision(x); ties go to the lowest class id.
inline int multiclass_predict(const std::vector<LinearModel>& models, std::span<const double> x) {
  int best = 0;
  double best_v = models.at(0).decision(x);
  for (std::size_t k = 1; k < models.size(); ++k) {
    const double v = models[k].decision(x);
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(k);
    }
  }
  return best;
}

/// One decision function per class. Two classes share a single SVM (class 0
/// gets the negated model); more use one-vs-rest.
inline std::vector<LinearModel> train_classifier(const Matrix& x, std::span<const int> labels,
                                                 std::size_t num_classes, double c,
                                                 const SvmOptions& opt = {}) {
  if (num_classes < 2) throw EvalError("classifier needs at least 2 classes");
  std::vector<int> y(labels.size());
  auto fit = [&](int cls) {
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == cls ? 1 : -1;
    return linear_svm_train(x, y, c, opt).model;
  };
  std::vector<LinearModel> models;
  if (num_classes == 2) {
    auto pos = fit(1);
    LinearModel neg = pos;
    for (auto& v : neg.w) v = -v;
    neg.b = -neg.b;
    models = {neg, pos};
  } else {
    for (std::size_t k = 0; k < num_classes; ++k) models.push_back(fit(static_cast<int>(k)));
  }
  return models;
}

inline double accuracy(const std::vector<LinearModel>& models, const Matrix& x,
                       std::span<const int> labels) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < x.rows; ++i) hit += multiclass_predict(models, x.row(i)) == labels[i];
  return x.rows == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(x.rows);
}

/// Per-column standardization fitted on a training split.
struct Standardizer {
  std::vector<double> mean, inv_std;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean.assign(x.cols, 0.0);
    s.inv_std.assign(x.cols, 1.0);
    if (x.rows == 0) return s;
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(i, j);
    for (auto& m : s.mean) m /= static_cast<double>(x.rows);
    std::vector<double> var(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) {
        const double dv = x(i, j) - s.mean[j];
        var[j] += dv * dv;
      }
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(x.rows));
      s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    return s;
  }

  Matrix apply(Matrix x) const {
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = (x(i, j) - mean[j]) * inv_std[j];
    return x;
  }
};

/// Fold id of every sample; each class is spread round-robin over the folds
/// so every fold's class histogram is within one sample of the global share.
inline std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                                 Rng& rng) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, idx] : by_class)
    if (idx.size() < folds)
      throw EvalError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                      " samples, fewer than " + std::to_string(folds) + " folds");
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t next = 0;
  for (auto& [cls, idx] : by_class) {
    rng.shuffle(idx.begin(), idx.end());
    for (auto i : idx) fold_of[i] = next++ % folds;
  }
  return fold_of;
}

inline const std::vector<double>& default_c_grid() {
  static const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  return grid;
}

enum class CSelection {
  inner_cv,   // C chosen per outer fold by CV on its training split
  test_max,   // C maximizing mean outer-fold accuracy (optimistic)
};

struct EvalOptions {
  std::size_t folds = 10;
  std::size_t runs = 5;
  std::size_t inner_folds = 5;
  std::vector<double> c_grid = default_c_grid();
  bool standardize = true;
  CSelection selection = CSelection::inner_cv;
  std::uint64_t seed = 0;
  SvmOptions svm{};
};

struct EvalReport {
  std::size_t num_runs = 0;
  std::size_t num_folds = 0;
  std::vector<std::vector<double>> fold_accuracy;  // [run][fold]
  std::vector<std::vector<double>> chosen_c;       // [run][fold]
  std::vector<double> run_mean;
  double mean = 0.0;
  double std = 0.0;  // population std of run means

  /// "ACC 90.5±0.5" in percent with one decimal.
  std::string summary() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << "ACC " << 100.0 * mean << "±" << 100.0 * std;
    return os.str();
  }

  void write_csv(std::ostream& out) const {
    out << "run,fold,accuracy,c\n" << std::setprecision(17);
    for (std::size_t r = 0; r < num_runs; ++r)
      for (std::size_t f = 0; f < num_folds; ++f)
        out << r << ',' << f << ',' << fold_accuracy[r][f] << ',' << chosen_c[r][f] << '\n';
  }
};

namespace detail {

struct Split {
  std::vector<std::size_t> train, test;
};

inline std::vector<Split> make_splits(const std::vector<std::size_t>& fold_of, std::size_t folds) {
  std::vector<Split> s(folds);
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    for (std::size_t f = 0; f < folds; ++f) (fold_of[i] == f ? s[f].test : s[f].train).push_back(i);
  return s;
}

inline std::vector<int> pick(std::span<const int> y, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

/// Accuracy on `test` after fitting on `train` with cost `c`.
inline double fit_score(const Matrix& x, std::span<const int> y, std::size_t k,
                        std::span<const std::size_t> train, std::span<const std::size_t> test,
                        double c, const EvalOptions& opt) {
  Matrix xtr = x.select(train), xte = x.select(test);
  if (opt.standardize) {
    const auto s = Standardizer::fit(xtr);
    xtr = s.apply(std::move(xtr));
    xte = s.apply(std::move(xte));
  }
  const auto ytr = pick(y, train), yte = pick(y, test);
  return accuracy(train_classifier(xtr, ytr, k, c, opt.svm), xte, yte);
}

inline double select_c_inner(const Matrix& x, std::span<const int> y, std::size_t k,
                             const std::vector<std::size_t>& train, const EvalOptions& opt,
                             Rng& rng) {
  const auto ytr = pick(y, train);
  std::map<int, std::size_t> counts;
  for (int v : ytr) ++counts[v];
  std::size_t smallest = ytr.size();
  for (auto& [cls, n] : counts) smallest = std::min(smallest, n);
  const std::size_t inner = std::min(opt.inner_folds, smallest);
  if (inner < 2) throw EvalError("training split too small for inner cross-validation");
  const auto inner_splits = make_splits(stratified_folds(ytr, inner, rng), inner);
  double best_c = opt.c_grid.front(), best_acc = -1.0;
  for (double c : opt.c_grid) {
    double acc = 0.0;
    for (const auto& sp : inner_splits) {
      std::vector<std::size_t> tr, te;
      for (auto i : sp.train) tr.push_back(train[i]);
      for (auto i : sp.test) te.push_back(train[i]);
      acc += fit_score(x, y, k, tr, te, c, opt);
    }
    acc /= static_cast<double>(inner_splits.size());
    if (acc > best_acc) {
      best_acc = acc;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace detail

/// Repeated stratified k-fold accuracy of a linear SVM on fixed features.
/// Runs are independent and may execute concurrently; the report is
/// assembled in run order, so it does not depend on scheduling.
inline EvalReport cross_validate(const Matrix& x, std::span<const int> labels,
                                 const EvalOptions& opt = {}) {
  if (labels.size() != x.rows) throw ShapeError("cross_validate: label count mismatch");
  if (opt.runs == 0) throw ConfigError("runs must be positive");
  if (opt.c_grid.empty()) throw ConfigError("empty C grid");
  std::set<int> classes(labels.begin(), labels.end());
  const std::size_t k = classes.empty() ? 0 : static_cast<std::size_t>(*classes.rbegin()) + 1;
  if (classes.size() < 2) throw EvalError("need at least 2 classes");
  if (*classes.begin() < 0 || classes.size() != k)
    throw EvalError("labels must be contiguous class ids 0..K-1");

  EvalReport rep;
  rep.num_runs = opt.runs;
  rep.num_folds = opt.folds;
  rep.fold_accuracy.assign(opt.runs, std::vector<double>(opt.folds, 0.0));
  rep.chosen_c.assign(opt.runs, std::vector<double>(opt.folds, 0.0));

  // Folds are drawn up front so that errors surface before any work starts.
  std::vector<std::vector<detail::Split>> splits(opt.runs);
  for (std::size_t r = 0; r < opt.runs; ++r) {
    Rng rng(opt.seed, {r, 0xf01dULL});
    splits[r] = detail::make_splits(stratified_folds(labels, opt.folds, rng), opt.folds);
  }

  parallel_for(opt.runs, [&](std::size_t r) {
    if (opt.selection == CSelection::inner_cv) {
      for (std::size_t f = 0; f < opt.folds; ++f) {
        Rng rng(opt.seed, {r, f, 0x1c0ULL});
        const auto& sp = splits[r][f];
        const double c = detail::select_c_inner(x, labels, k, sp.train, opt, rng);
        rep.chosen_c[r][f] = c;
        rep.fold_accuracy[r][f] = detail::fit_score(x, labels, k, sp.train, sp.test, c, opt);
      }
    } else {
      double best = -1.0;
      for (double c : opt.c_grid) {
        std::vector<double> acc(opt.folds);
        for (std::size_t f = 0; f < opt.folds; ++f)
          acc[f] = detail::fit_score(x, labels, k, splits[r][f].train, splits[r][f].test, c, opt);
        const double m = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(opt.folds);
        if (m > best) {
          best = m;
          rep.fold_accuracy[r] = acc;
          rep.chosen_c[r].assign(opt.folds, c);
        }
      }
    }
  });

  for (std::size_t r = 0; r < opt.runs; ++r)
    rep.run_mean.push_back(std::accumulate(rep.fold_accuracy[r].begin(), rep.fold_accuracy[r].end(), 0.0) /
                           static_cast<double>(opt.folds));
  rep.mean = std::accumulate(rep.run_mean.begin(), rep.run_mean.end(), 0.0) /
             static_cast<double>(opt.runs);
  double var = 0.0;
  for (double m : rep.run_mean) var += (m - rep.mean) * (m - rep.mean);
  rep.std = std::sqrt(var / static_cast<double>(opt.runs));
  return rep;
}

}  // namespace skr
