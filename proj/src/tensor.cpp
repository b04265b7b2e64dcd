#include "rseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rseg {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->data.size(), 0.0);
  } else {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::clone() const { return Tensor(node_->shape, node_->data, false); }

bool Tensor::all_finite() const {
  return std::all_of(node_->data.begin(), node_->data.end(), [](double v) { return std::isfinite(v); });
}

void Tape::record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  auto node = loss.node();
  node->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

}  // namespace rseg
