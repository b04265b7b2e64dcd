#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rseg/image_io.hpp"
#include "rseg/mask.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ShapeKind { kSquare, kCircle, kTriangle };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class Side { kLeft, kRight, kTop, kBottom };

std::string_view name_of(ShapeKind kind);
std::string_view name_of(Color color);
std::string_view name_of(Side side);
std::array<std::uint8_t, 3> rgb_of(Color color);

/// A shape occupying the integer box [x0, x0 + size) x [y0, y0 + size).
struct ShapeInstance {
  ShapeKind kind;
  Color color;
  std::size_t x0;
  std::size_t y0;
  std::size_t size;

  double center_x() const { return static_cast<double>(x0) + static_cast<double>(size) / 2.0; }
  double center_y() const { return static_cast<double>(y0) + static_cast<double>(size) / 2.0; }
};

struct Scene {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<ShapeInstance> shapes;
  std::size_t referent = 0;
  std::string expression;
};

/// Pixel-center rasterization of one shape on an H x W canvas.
Mask rasterize(const ShapeInstance& shape, std::size_t height, std::size_t width);
RgbImage render(const Scene& scene);
/// True when the shape's center lies strictly inside the named half of the canvas.
bool on_side(const ShapeInstance& shape, Side side, std::size_t width, std::size_t height);

/// Indices of the shapes that satisfy every constraint of an expression of the
/// form "the <color> <shape>" or "<color> <shape> on the <side>". Expressions
/// outside the grammar match nothing.
std::vector<std::size_t> resolve_expression(const Scene& scene, std::string_view expression);

struct SynthOptions {
  std::uint64_t seed = 1;
  std::size_t count = 100;
  std::size_t width = 64;
  std::size_t height = 64;
  std::array<std::size_t, 3> split_ratio{8, 1, 1};  // train : val : test
  double spatial_fraction = 0.5;
  /// Shape side range; 0 picks defaults proportional to the canvas.
  std::size_t min_size = 0;
  std::size_t max_size = 0;
};

struct GeneratedSample {
  Scene scene;
  Mask mask;
  std::string split;
};

/// Deterministic under options.seed. Spatial expressions cycle through
/// left/right/top/bottom so the sides are balanced.
std::vector<GeneratedSample> generate(const SynthOptions& options);

/// Per-split record counts for `count` samples under `ratio`.
std::array<std::size_t, 3> split_counts(std::size_t count, const std::array<std::size_t, 3>& ratio);
inline constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};

struct ManifestRecord {
  std::filesystem::path image;  // as written, relative to the manifest directory
  std::filesystem::path mask;
  std::string split;
  std::string expression;
};

/// Writes images/NNNNNN.ppm, masks/NNNNNN.pgm and manifest.tsv under `dir`;
/// returns the manifest path.
std::filesystem::path write_corpus(const std::vector<GeneratedSample>& samples, const std::filesystem::path& dir);

/// Tab-separated: image path, mask path, split, expression.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

struct Sample {
  Tensor image;  // [3 x H x W], values in [0, 1]
  Mask mask;
  std::string expression;
  std::vector<std::string> tokens;
  std::string split;
};

Sample to_sample(const GeneratedSample& generated);
std::vector<Sample> to_samples(const std::vector<GeneratedSample>& generated,
                               std::optional<std::string_view> split = std::nullopt);

/// Loads and decodes every record (optionally only one split).
std::vector<Sample> load_manifest(const std::filesystem::path& path,
                                  std::optional<std::string_view> split = std::nullopt);

}  // namespace rseg
