#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rseg/params.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

struct ConvLayerSpec {
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad;
  bool relu;

  bool operator==(const ConvLayerSpec&) const = default;
};

/// Fully convolutional stack. Layers are written "out/kernel/stride/pad/act"
/// (act is relu or linear), comma separated.
struct BackboneConfig {
  std::vector<ConvLayerSpec> layers;

  /// Four 3x3 stride-2 layers, channels 16, 32, 32, 32 (stride 16).
  static BackboneConfig desk_default();
  static BackboneConfig parse(std::string_view text);
  std::string to_string() const;

  std::size_t total_stride() const;
  std::size_t descriptor_channels() const;
  /// Throws DimensionError unless width and height are divisible by the stride.
  void check_input(std::size_t height, std::size_t width) const;

  bool operator==(const BackboneConfig&) const = default;
};

/// Glorot-uniform filters, zero biases, registered as <prefix>.conv<i>.weight/.bias.
void init_backbone(ParamStore& store, const BackboneConfig& config, std::size_t in_channels, Rng& rng,
                   const std::string& prefix = "backbone");

/// image [C x H x W] -> [D_im x H/s x W/s]
Tensor extract_feature_map(Tape& tape, const Tensor& image, const ParamStore& store, const BackboneConfig& config,
                           const std::string& prefix = "backbone");

/// Per-location L2 normalization along channels.
Tensor normalize_locations(Tape& tape, const Tensor& map, double eps = 1e-8);

/// [2 x h x w]: channel 0 is x = -1 + 2j/(w-1), channel 1 is y = -1 + 2i/(h-1);
/// a unit extent gives 0.
Tensor coordinate_channels(std::size_t h, std::size_t w);

/// Appends the two coordinate channels. With enabled == false the channels
/// are present but zero (coordinate ablation).
Tensor append_coordinates(Tape& tape, const Tensor& map, bool enabled = true);

}  // namespace rseg
