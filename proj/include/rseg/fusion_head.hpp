#pragma once

#include <cstddef>

#include "rseg/mask.hpp"
#include "rseg/params.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

enum class Resolution { kCoarse, kHigh };

/// Per-pixel foreground scores, [1 x h x w] (coarse) or [1 x H x W] (high).
struct ResponseMap {
  Tensor scores;
  Resolution resolution = Resolution::kCoarse;

  std::size_t height() const { return scores.dim(1); }
  std::size_t width() const { return scores.dim(2); }
};

/// Registers fusion.fc1.{weight,bias} ([d_cls x d_star x 1 x 1]) and
/// fusion.fc2.{weight,bias} ([1 x d_cls x 1 x 1]), Glorot-uniform weights.
void init_classifier(ParamStore& store, std::size_t d_star, std::size_t d_cls, Rng& rng);

/// Registers fusion.deconv.weight initialized by make_bilinear_filter(stride),
/// replacing any existing deconv filter.
void init_deconv(ParamStore& store, std::size_t stride);
inline constexpr const char* kDeconvParam = "fusion.deconv.weight";

/// [(D_im+2) x h x w] and h_T [D_text] -> [(D_im+2+D_text) x h x w]
Tensor tile_and_concat(Tape& tape, const Tensor& fmap, const Tensor& text);

/// 1x1 conv -> relu -> 1x1 conv; returns the coarse [1 x h x w] score map.
Tensor classify(Tape& tape, const Tensor& fused, const ParamStore& store);

/// k[i][j] = (1 - |i - c|/s)(1 - |j - c|/s), c = (2s - 1)/2, as [1 x 1 x 2s x 2s].
Tensor make_bilinear_filter(std::size_t stride);

/// Stride-s transposed convolution with symmetric crop s/2 mapping each
/// channel of [C x H/s x W/s] to [C x H x W]. The stride must be even.
Tensor upsample(Tape& tape, const Tensor& coarse, const Tensor& filter, std::size_t stride, std::size_t height,
                std::size_t width);

/// mask = scores > 0, for a [1 x H x W] or [H x W] map.
Mask decide(const Tensor& scores);

}  // namespace rseg
