#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rseg/tensor.hpp"

namespace rseg {

/// Named, ordered collection of learnable tensors.
class ParamStore {
 public:
  /// Registers a tensor under a unique name; it is marked as requiring grad.
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  void erase(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  /// Deep copy with fresh storage.
  ParamStore clone() const;
  std::size_t total_elements() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Classical (heavy-ball) momentum: v <- momentum * v - lr * grad; p <- p + v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(ParamStore& params);
  double lr() const { return lr_; }
  double momentum() const { return momentum_; }
  const std::vector<std::vector<double>>& velocities() const { return velocities_; }

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocities_;
};

void sgd_momentum_step(std::vector<Tensor*> params, std::vector<std::vector<double>>& velocities, double lr,
                       double momentum);

/// mt19937_64 with explicit integer/real mappings, so sequences do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Fill with uniform values in [-bound, bound].
void fill_uniform(Tensor& t, double bound, Rng& rng);

}  // namespace rseg
