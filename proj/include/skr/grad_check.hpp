#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "skr/tensor.hpp"

namespace skr {

/// A scalar-valued function of some tensors, recorded on the given tape.
using ScalarFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCheckOptions {
  double step = 1e-5;
};

/// Compares reverse-mode gradients of `f` at `inputs` against central
/// differences. Returns max |analytic - numeric| / max(1, |analytic|, |numeric|)
/// over every entry of every input. Input values are restored on return.
inline double grad_check(const ScalarFn& f, std::vector<Tensor> inputs,
                         GradCheckOptions opts = {}) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    Tensor loss = f(tape, inputs);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto eval = [&]() {
    Tape tape;
    return f(tape, inputs).item();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto vals = inputs[k].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + opts.step;
      const double up = eval();
      vals[i] = orig - opts.step;
      const double down = eval();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (auto& t : inputs) t.zero_grad();
  return worst;
}

}  // namespace skr
