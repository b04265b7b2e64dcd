#include "rseg/fusion_head.hpp"

#include <cmath>

#include "rseg/ops.hpp"

namespace rseg {

namespace {

Tensor glorot_1x1(std::size_t out, std::size_t in, Rng& rng) {
  auto w = Tensor::zeros({out, in, 1, 1});
  fill_uniform(w, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
  return w;
}

}  // namespace

void init_classifier(ParamStore& store, std::size_t d_star, std::size_t d_cls, Rng& rng) {
  store.add("fusion.fc1.weight", glorot_1x1(d_cls, d_star, rng));
  store.add("fusion.fc1.bias", Tensor::zeros({d_cls}));
  store.add("fusion.fc2.weight", glorot_1x1(1, d_cls, rng));
  store.add("fusion.fc2.bias", Tensor::zeros({1}));
}

void init_deconv(ParamStore& store, std::size_t stride) {
  store.erase(kDeconvParam);
  store.add(kDeconvParam, make_bilinear_filter(stride));
}

Tensor tile_and_concat(Tape& tape, const Tensor& fmap, const Tensor& text) {
  if (fmap.rank() != 3 || text.rank() != 1) {
    throw DimensionError("tile_and_concat: expected [C x h x w] and [D], got " + shape_str(fmap.shape()) + " and " +
                         shape_str(text.shape()));
  }
  return concat_channels(tape, fmap, tile_spatial(tape, text, fmap.dim(1), fmap.dim(2)));
}

Tensor classify(Tape& tape, const Tensor& fused, const ParamStore& store) {
  const auto& w1 = store.get("fusion.fc1.weight");
  if (fused.rank() != 3 || fused.dim(0) != w1.dim(1)) {
    throw DimensionError("classify: expected " + std::to_string(w1.dim(1)) + " channels, got " +
                         shape_str(fused.shape()));
  }
  auto hidden = relu(tape, conv2d(tape, fused, w1, store.get("fusion.fc1.bias"), 1, 0));
  return conv2d(tape, hidden, store.get("fusion.fc2.weight"), store.get("fusion.fc2.bias"), 1, 0);
}

Tensor make_bilinear_filter(std::size_t stride) {
  if (stride == 0) throw ContractError("make_bilinear_filter: stride must be >= 1");
  const auto k = 2 * stride;
  const double s = static_cast<double>(stride);
  const double c = (static_cast<double>(k) - 1.0) / 2.0;
  std::vector<double> profile(k);
  for (std::size_t i = 0; i < k; ++i) profile[i] = 1.0 - std::abs(static_cast<double>(i) - c) / s;
  auto filter = Tensor::zeros({1, 1, k, k});
  auto data = filter.mutable_data();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) data[i * k + j] = profile[i] * profile[j];
  return filter;
}

Tensor upsample(Tape& tape, const Tensor& coarse, const Tensor& filter, std::size_t stride, std::size_t height,
                std::size_t width) {
  if (stride < 2 || stride % 2 != 0) {
    throw ContractError("upsample: stride must be even and >= 2, got " + std::to_string(stride));
  }
  if (coarse.rank() != 3 || coarse.dim(1) * stride != height || coarse.dim(2) * stride != width) {
    throw DimensionError("upsample: coarse map " + shape_str(coarse.shape()) + " does not cover " +
                         std::to_string(height) + "x" + std::to_string(width) + " at stride " +
                         std::to_string(stride));
  }
  if (filter.shape() != Shape{1, 1, 2 * stride, 2 * stride}) {
    throw DimensionError("upsample: filter " + shape_str(filter.shape()) + " is not 1x1x2sx2s");
  }
  const auto crop = stride / 2;
  if (coarse.dim(0) == 1) return conv_transpose2d(tape, coarse, filter, stride, crop);
  Tensor out;
  for (std::size_t c = 0; c < coarse.dim(0); ++c) {
    out = concat(tape, out, conv_transpose2d(tape, slice(tape, coarse, c, c + 1), filter, stride, crop));
  }
  return out;
}

Mask decide(const Tensor& scores) {
  std::size_t h = 0, w = 0;
  if (scores.rank() == 3 && scores.dim(0) == 1) {
    h = scores.dim(1);
    w = scores.dim(2);
  } else if (scores.rank() == 2) {
    h = scores.dim(0);
    w = scores.dim(1);
  } else {
    throw DimensionError("decide: expected a single-channel map, got " + shape_str(scores.shape()));
  }
  Mask mask(h, w);
  const auto v = scores.data();
  for (std::size_t i = 0; i < mask.size(); ++i) mask.bits[i] = v[i] > 0.0 ? 1 : 0;
  return mask;
}

}  // namespace rseg
