#include "rseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

namespace rseg {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

Tensor make_result(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      if (av == 0.0) continue;
      const double* brow = b + t * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A^T * B, A is [k x m], B is [k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) {
    const double* brow = b + t * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[t * m + i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A * B^T, A is [m x k], B is [n x k]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      c[i * n + j] += acc;
    }
  }
}

struct ConvGeometry {
  std::size_t channels;
  std::size_t in_h, in_w;
  std::size_t k_h, k_w;
  std::size_t stride, pad;
  std::size_t out_h, out_w;

  std::size_t col_rows() const { return channels * k_h * k_w; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// col[(c, ky, kx)][(oy, ox)] = in[c][oy*stride + ky - pad][ox*stride + kx - pad], zero outside.
void im2col(const double* in, const ConvGeometry& g, double* col) {
  const auto cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        double* row = col + ((c * g.k_h + ky) * g.k_w + kx) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = in + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im_add(const double* col, const ConvGeometry& g, double* in) {
  const auto cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const double* row = col + ((c * g.k_h + ky) * g.k_w + kx) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          double* dst = in + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename Forward, typename Derivative>
Tensor unary(Tape& tape, const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs[i]);
  auto result = make_result(x.shape(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record([xn = x.node(), on = result.node(), df] {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i] * df(xn->data[i], on->data[i]);
    });
  }
  return result;
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool rg = a.requires_grad() || b.requires_grad();
  auto result = make_result({m, n}, std::move(out), rg);
  if (rg) {
    tape.record([an = a.node(), bn = b.node(), on = result.node(), m, k, n] {
      if (an->requires_grad) gemm_nt(on->grad.data(), bn->data.data(), an->grad.data(), m, n, k);
      if (bn->requires_grad) gemm_tn(an->data.data(), on->grad.data(), bn->grad.data(), k, m, n);
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  auto result = make_result(a.shape(), std::move(out), rg);
  if (rg) {
    tape.record([an = a.node(), bn = b.node(), on = result.node()] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i];
        if (bn->requires_grad) bn->grad[i] += on->grad[i];
      }
    });
  }
  return result;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  auto result = make_result(a.shape(), std::move(out), rg);
  if (rg) {
    tape.record([an = a.node(), bn = b.node(), on = result.node()] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i];
        if (bn->requires_grad) bn->grad[i] -= on->grad[i];
      }
    });
  }
  return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  auto result = make_result(a.shape(), std::move(out), rg);
  if (rg) {
    tape.record([an = a.node(), bn = b.node(), on = result.node()] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i] * bn->data[i];
        if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->data[i];
      }
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary(
      tape, x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return sigmoid(v); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto result = make_result({1}, {total}, x.requires_grad());
  if (x.requires_grad()) {
    tape.record([xn = x.node(), on = result.node()] {
      const double g = on->grad[0];
      for (double& gi : xn->grad) gi += g;
    });
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto result = make_result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                            x.requires_grad());
  if (x.requires_grad()) {
    tape.record([xn = x.node(), on = result.node()] {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return result;
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
  if (!a.defined()) return b;
  if (!b.defined()) return a;
  if (a.rank() != b.rank() || a.rank() == 0 || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw DimensionError("concat: trailing extents differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const bool rg = a.requires_grad() || b.requires_grad();
  auto result = make_result(std::move(shape), std::move(out), rg);
  if (rg) {
    tape.record([an = a.node(), bn = b.node(), on = result.node()] {
      const auto na = an->data.size();
      if (an->requires_grad) {
        for (std::size_t i = 0; i < na; ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < bn->data.size(); ++i) bn->grad[i] += on->grad[na + i];
      }
    });
  }
  return result;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin >= end || end > x.dim(0)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                         shape_str(x.shape()));
  }
  const auto inner = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(begin * inner);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>((end - begin) * inner));
  auto result = make_result(std::move(shape), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record([xn = x.node(), on = result.node(), offset = begin * inner] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[offset + i] += on->grad[i];
    });
  }
  return result;
}

Tensor gather_row(Tape& tape, const Tensor& matrix, std::size_t index) {
  require_rank(matrix, 2, "gather_row", "matrix");
  if (index >= matrix.dim(0)) {
    throw ContractError("gather_row: index " + std::to_string(index) + " out of range for " +
                        shape_str(matrix.shape()));
  }
  const auto cols = matrix.dim(1);
  const auto first = matrix.data().begin() + static_cast<std::ptrdiff_t>(index * cols);
  auto result = make_result({cols}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(cols)),
                            matrix.requires_grad());
  if (matrix.requires_grad()) {
    tape.record([mn = matrix.node(), on = result.node(), offset = index * cols] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) mn->grad[offset + i] += on->grad[i];
    });
  }
  return result;
}

Tensor tile_spatial(Tape& tape, const Tensor& v, std::size_t h, std::size_t w) {
  require_rank(v, 1, "tile_spatial", "vector");
  const auto d = v.dim(0);
  const auto plane = h * w;
  std::vector<double> out(d * plane);
  for (std::size_t c = 0; c < d; ++c) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, v[c]);
  auto result = make_result({d, h, w}, std::move(out), v.requires_grad());
  if (v.requires_grad()) {
    tape.record([vn = v.node(), on = result.node(), plane] {
      for (std::size_t c = 0; c < vn->grad.size(); ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += on->grad[c * plane + p];
        vn->grad[c] += acc;
      }
    });
  }
  return result;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& filters, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(filters, 4, "conv2d", "filters");
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (filters.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d: filters " + shape_str(filters.shape()) + " expect " +
                         std::to_string(filters.dim(1)) + " input channels, input is " + shape_str(input.shape()));
  }
  const auto c_out = filters.dim(0);
  if (bias.defined() && bias.shape() != Shape{c_out}) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(c_out) +
                         " output channels");
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), filters.dim(2), filters.dim(3), stride, pad, 0, 0};
  if (g.in_h + 2 * pad < g.k_h || g.in_w + 2 * pad < g.k_w) {
    throw DimensionError("conv2d: non-positive output extent for input " + shape_str(input.shape()) +
                         " and filters " + shape_str(filters.shape()));
  }
  g.out_h = (g.in_h + 2 * pad - g.k_h) / stride + 1;
  g.out_w = (g.in_w + 2 * pad - g.k_w) / stride + 1;

  const auto rows = g.col_rows(), cols = g.col_cols();
  auto col = std::make_shared<std::vector<double>>(rows * cols);
  im2col(input.data().data(), g, col->data());

  std::vector<double> out(c_out * cols, 0.0);
  if (bias.defined()) {
    for (std::size_t co = 0; co < c_out; ++co)
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(co * cols), cols, bias[co]);
  }
  gemm_nn(filters.data().data(), col->data(), out.data(), c_out, rows, cols);

  const bool bias_rg = bias.defined() && bias.requires_grad();
  const bool rg = input.requires_grad() || filters.requires_grad() || bias_rg;
  auto result = make_result({c_out, g.out_h, g.out_w}, std::move(out), rg);
  if (rg) {
    auto bn = bias.defined() ? bias.node() : nullptr;
    tape.record([in = input.node(), fn = filters.node(), bn, on = result.node(), col, g, c_out] {
      const auto rows = g.col_rows(), cols = g.col_cols();
      const double* gout = on->grad.data();
      if (fn->requires_grad) gemm_nt(gout, col->data(), fn->grad.data(), c_out, cols, rows);
      if (bn && bn->requires_grad) {
        for (std::size_t co = 0; co < c_out; ++co) {
          double acc = 0.0;
          for (std::size_t p = 0; p < cols; ++p) acc += gout[co * cols + p];
          bn->grad[co] += acc;
        }
      }
      if (in->requires_grad) {
        std::vector<double> gcol(rows * cols, 0.0);
        gemm_tn(fn->data.data(), gout, gcol.data(), rows, c_out, cols);
        col2im_add(gcol.data(), g, in->grad.data());
      }
    });
  }
  return result;
}

Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& filters, std::size_t stride,
                        std::size_t crop) {
  require_rank(input, 3, "conv_transpose2d", "input");
  require_rank(filters, 4, "conv_transpose2d", "filters");
  if (stride == 0) throw ContractError("conv_transpose2d: stride must be positive");
  if (filters.dim(0) != input.dim(0)) {
    throw DimensionError("conv_transpose2d: filters " + shape_str(filters.shape()) + " expect " +
                         std::to_string(filters.dim(0)) + " input channels, input is " + shape_str(input.shape()));
  }
  const auto c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto c_out = filters.dim(1), k_h = filters.dim(2), k_w = filters.dim(3);
  const auto full_h = (h - 1) * stride + k_h, full_w = (w - 1) * stride + k_w;
  if (2 * crop >= full_h || 2 * crop >= full_w) {
    throw DimensionError("conv_transpose2d: crop " + std::to_string(crop) + " too large for uncropped extent " +
                         std::to_string(full_h) + "x" + std::to_string(full_w));
  }
  // Geometry of the conv2d whose data-gradient this op computes.
  const ConvGeometry g{c_out, full_h - 2 * crop, full_w - 2 * crop, k_h, k_w, stride, crop, h, w};
  const auto rows = g.col_rows(), cols = g.col_cols();

  std::vector<double> col(rows * cols, 0.0);
  gemm_tn(filters.data().data(), input.data().data(), col.data(), rows, c_in, cols);
  std::vector<double> out(c_out * g.in_h * g.in_w, 0.0);
  col2im_add(col.data(), g, out.data());

  const bool rg = input.requires_grad() || filters.requires_grad();
  auto result = make_result({c_out, g.in_h, g.in_w}, std::move(out), rg);
  if (rg) {
    tape.record([in = input.node(), fn = filters.node(), on = result.node(), g, c_in] {
      const auto rows = g.col_rows(), cols = g.col_cols();
      std::vector<double> gcol(rows * cols);
      im2col(on->grad.data(), g, gcol.data());
      if (in->requires_grad) gemm_nn(fn->data.data(), gcol.data(), in->grad.data(), c_in, rows, cols);
      if (fn->requires_grad) gemm_nt(in->data.data(), gcol.data(), fn->grad.data(), c_in, cols, rows);
    });
  }
  return result;
}

Tensor l2_normalize(Tape& tape, const Tensor& v, double eps) {
  double sq = 0.0;
  for (double x : v.data()) sq += x * x;
  const double norm = std::sqrt(sq);
  const double denom = std::max(norm, eps);
  std::vector<double> out(v.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] / denom;
  auto result = make_result(v.shape(), std::move(out), v.requires_grad());
  if (v.requires_grad()) {
    tape.record([vn = v.node(), on = result.node(), norm, eps] {
      const auto& y = on->data;
      const auto& g = on->grad;
      if (norm > eps) {
        double dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * g[i];
        for (std::size_t i = 0; i < y.size(); ++i) vn->grad[i] += (g[i] - y[i] * dot) / norm;
      } else {
        for (std::size_t i = 0; i < y.size(); ++i) vn->grad[i] += g[i] / eps;
      }
    });
  }
  return result;
}

Tensor l2_normalize_channels(Tape& tape, const Tensor& map, double eps) {
  require_rank(map, 3, "l2_normalize_channels", "map");
  const auto channels = map.dim(0), plane = map.dim(1) * map.dim(2);
  const auto x = map.data();
  auto norms = std::make_shared<std::vector<double>>(plane, 0.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) (*norms)[p] += x[c * plane + p] * x[c * plane + p];
  for (auto& n : *norms) n = std::sqrt(n);
  std::vector<double> out(map.numel());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = x[c * plane + p] / std::max((*norms)[p], eps);
  auto result = make_result(map.shape(), std::move(out), map.requires_grad());
  if (map.requires_grad()) {
    tape.record([mn = map.node(), on = result.node(), norms, channels, plane, eps] {
      const auto& y = on->data;
      const auto& g = on->grad;
      std::vector<double> dots(plane, 0.0);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < plane; ++p) dots[p] += y[c * plane + p] * g[c * plane + p];
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          const auto i = c * plane + p;
          const double n = (*norms)[p];
          mn->grad[i] += n > eps ? (g[i] - y[i] * dots[p]) / n : g[i] / eps;
        }
      }
    });
  }
  return result;
}

Tensor logistic_loss(Tape& tape, const Tensor& scores, const Tensor& targets, double alpha_f, double alpha_b,
                     double normalizer) {
  require_same_shape(scores, targets, "logistic_loss");
  if (!(normalizer > 0.0)) throw ContractError("logistic_loss: normalizer must be positive");
  const auto s = scores.data();
  const auto t = targets.data();
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t[i] == 1.0) {
      total += alpha_f * softplus(-s[i]);
    } else if (t[i] == 0.0) {
      total += alpha_b * softplus(s[i]);
    } else {
      throw ContractError("logistic_loss: target at index " + std::to_string(i) + " is not binary");
    }
  }
  auto result = make_result({1}, {total / normalizer}, scores.requires_grad());
  if (scores.requires_grad()) {
    tape.record([sn = scores.node(), tn = targets.node(), on = result.node(), alpha_f, alpha_b, normalizer] {
      const double g = on->grad[0] / normalizer;
      for (std::size_t i = 0; i < sn->data.size(); ++i) {
        const double v = sn->data[i];
        sn->grad[i] += tn->data[i] == 1.0 ? -g * alpha_f * sigmoid(-v) : g * alpha_b * sigmoid(v);
      }
    });
  }
  return result;
}

}  // namespace rseg
