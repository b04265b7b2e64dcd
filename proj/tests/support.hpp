#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "rseg/ops.hpp"
#include "rseg/params.hpp"
#include "rseg/tensor.hpp"

namespace rseg::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// |a - n| / max(|a|, |n|, floor): relative error with a floor for entries
/// whose true gradient is (near) zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central finite differences against the tape's analytic gradient. `loss`
/// must build a scalar from the current values of `inputs`. When
/// `max_per_input` is non-zero, that many entries of each input are sampled.
inline GradCheck grad_check(const std::function<Tensor(Tape&)>& loss, std::vector<std::pair<std::string, Tensor>> inputs,
                            double step = 1e-5, std::size_t max_per_input = 0, std::uint64_t seed = 5) {
  for (auto& [name, t] : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).item();
  };
  GradCheck result;
  Rng rng(seed);
  for (auto& [name, t] : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_input > 0 && idx.size() > max_per_input) {
      rng.shuffle(idx);
      idx.resize(max_per_input);
    }
    auto data = t.mutable_data();
    for (auto i : idx) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = evaluate();
      data[i] = saved - step;
      const double down = evaluate();
      data[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double err = relative_error(analytic[i], numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return result;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero so relu kinks stay out of reach of the
/// finite-difference step.
inline Tensor random_away_from_zero(Shape shape, Rng& rng, double gap = 0.05) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) {
    const double mag = rng.uniform(gap, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Weighted sum with fixed pseudo-random weights, so every output element
/// contributes a distinct gradient.
inline Tensor probe(Tape& tape, const Tensor& x, std::uint64_t seed = 11) {
  Rng rng(seed);
  auto w = random_tensor(x.shape(), rng);
  return sum(tape, mul(tape, x, w));
}

}  // namespace rseg::testing
