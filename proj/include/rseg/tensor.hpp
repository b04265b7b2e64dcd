#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rseg {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Incompatible extents between operands, or an extent that would be non-positive.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A forward value or loss became NaN/Inf.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage. Use clone() for a detached copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();

  bool requires_grad() const;
  void set_requires_grad(bool on);
  void zero_grad();

  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  bool all_finite() const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of backward closures for one forward pass.
///
/// Ops append a closure only when at least one input requires a gradient.
/// backward() replays closures in exact reverse order of recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  void record(std::function<void()> backward_fn);
  void backward(const Tensor& loss);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<std::function<void()>> entries_;
};

}  // namespace rseg
