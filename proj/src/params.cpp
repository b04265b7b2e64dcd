#include "rseg/params.hpp"

#include <algorithm>

namespace rseg {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("parameter '" + name + "' registered twice");
  value.set_requires_grad(true);
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("unknown parameter '" + name + "'");
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("unknown parameter '" + name + "'");
}

void ParamStore::erase(const std::string& name) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == name; });
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore copy;
  for (const auto& [n, t] : entries_) copy.add(n, t.clone());
  return copy;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void sgd_momentum_step(std::vector<Tensor*> params, std::vector<std::vector<double>>& velocities, double lr,
                       double momentum) {
  if (velocities.empty()) {
    for (auto* p : params) velocities.emplace_back(p->numel(), 0.0);
  }
  if (velocities.size() != params.size()) throw ContractError("sgd: velocity count does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& v = velocities[k];
    if (v.size() != p.numel()) throw DimensionError("sgd: velocity buffer does not match " + shape_str(p.shape()));
    auto data = p.mutable_data();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum * v[i] - lr * grad[i];
      data[i] += v[i];
    }
  }
}

void SgdMomentum::step(ParamStore& params) {
  std::vector<Tensor*> ptrs;
  for (auto& [_, t] : params) ptrs.push_back(&t);
  sgd_momentum_step(std::move(ptrs), velocities_, lr_, momentum_);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ContractError("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  // Rejection keeps the mapping unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r = next();
  while (r >= limit) r = next();
  return lo + static_cast<std::int64_t>(r % span);
}

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
}

}  // namespace rseg
