#include "rseg/backbone.hpp"

#include <cmath>
#include <sstream>

#include "rseg/ops.hpp"

namespace rseg {

BackboneConfig BackboneConfig::desk_default() {
  return {{{16, 3, 2, 1, true}, {32, 3, 2, 1, true}, {32, 3, 2, 1, true}, {32, 3, 2, 1, true}}};
}

BackboneConfig BackboneConfig::parse(std::string_view text) {
  BackboneConfig config;
  std::string item;
  std::istringstream items{std::string(text)};
  while (std::getline(items, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    std::istringstream fields(item);
    std::string field;
    std::vector<std::string> parts;
    while (std::getline(fields, field, '/')) parts.push_back(field);
    if (parts.size() != 5 || (parts[4] != "relu" && parts[4] != "linear")) {
      throw ContractError("backbone layer '" + item + "' is not out/kernel/stride/pad/relu|linear");
    }
    ConvLayerSpec layer{};
    try {
      layer.out_channels = std::stoul(parts[0]);
      layer.kernel = std::stoul(parts[1]);
      layer.stride = std::stoul(parts[2]);
      layer.pad = std::stoul(parts[3]);
    } catch (const std::exception&) {
      throw ContractError("backbone layer '" + item + "' has a non-numeric field");
    }
    layer.relu = parts[4] == "relu";
    if (layer.out_channels == 0 || layer.kernel == 0 || layer.stride == 0) {
      throw ContractError("backbone layer '" + item + "' has a zero extent");
    }
    config.layers.push_back(layer);
  }
  if (config.layers.empty()) throw ContractError("backbone needs at least one layer");
  return config;
}

std::string BackboneConfig::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) os << ',';
    os << l.out_channels << '/' << l.kernel << '/' << l.stride << '/' << l.pad << '/' << (l.relu ? "relu" : "linear");
  }
  return os.str();
}

std::size_t BackboneConfig::total_stride() const {
  std::size_t s = 1;
  for (const auto& l : layers) s *= l.stride;
  return s;
}

std::size_t BackboneConfig::descriptor_channels() const { return layers.back().out_channels; }

void BackboneConfig::check_input(std::size_t height, std::size_t width) const {
  const auto s = total_stride();
  if (height % s != 0 || width % s != 0) {
    throw DimensionError("input " + std::to_string(width) + "x" + std::to_string(height) +
                         " is not divisible by backbone stride " + std::to_string(s));
  }
}

void init_backbone(ParamStore& store, const BackboneConfig& config, std::size_t in_channels, Rng& rng,
                   const std::string& prefix) {
  auto channels = in_channels;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    const auto area = l.kernel * l.kernel;
    auto weight = Tensor::zeros({l.out_channels, channels, l.kernel, l.kernel});
    fill_uniform(weight, std::sqrt(6.0 / static_cast<double>(channels * area + l.out_channels * area)), rng);
    const auto name = prefix + ".conv" + std::to_string(i);
    store.add(name + ".weight", std::move(weight));
    store.add(name + ".bias", Tensor::zeros({l.out_channels}));
    channels = l.out_channels;
  }
}

Tensor extract_feature_map(Tape& tape, const Tensor& image, const ParamStore& store, const BackboneConfig& config,
                           const std::string& prefix) {
  if (image.rank() != 3) throw DimensionError("extract_feature_map: image must be [C x H x W], got " + shape_str(image.shape()));
  config.check_input(image.dim(1), image.dim(2));
  Tensor x = image;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    const auto name = prefix + ".conv" + std::to_string(i);
    x = conv2d(tape, x, store.get(name + ".weight"), store.get(name + ".bias"), l.stride, l.pad);
    if (l.relu) x = relu(tape, x);
  }
  const auto s = config.total_stride();
  if (x.dim(1) != image.dim(1) / s || x.dim(2) != image.dim(2) / s) {
    throw DimensionError("backbone geometry maps " + shape_str(image.shape()) + " to " + shape_str(x.shape()) +
                         ", expected spatial extent " + std::to_string(image.dim(1) / s) + "x" +
                         std::to_string(image.dim(2) / s));
  }
  return x;
}

Tensor normalize_locations(Tape& tape, const Tensor& map, double eps) { return l2_normalize_channels(tape, map, eps); }

Tensor coordinate_channels(std::size_t h, std::size_t w) {
  auto coords = Tensor::zeros({2, h, w});
  auto data = coords.mutable_data();
  const auto plane = h * w;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      data[i * w + j] = w > 1 ? -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(w - 1) : 0.0;
      data[plane + i * w + j] = h > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(h - 1) : 0.0;
    }
  }
  return coords;
}

Tensor append_coordinates(Tape& tape, const Tensor& map, bool enabled) {
  if (map.rank() != 3) throw DimensionError("append_coordinates: map must be [C x h x w], got " + shape_str(map.shape()));
  auto coords = enabled ? coordinate_channels(map.dim(1), map.dim(2)) : Tensor::zeros({2, map.dim(1), map.dim(2)});
  return concat_channels(tape, map, coords);
}

}  // namespace rseg
