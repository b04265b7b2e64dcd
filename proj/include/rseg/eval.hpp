#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rseg/mask.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

/// How an original H0 x W0 image was scaled and padded (right/bottom) into
/// the fixed H x W model input.
struct PadGeometry {
  std::size_t original_height = 0;
  std::size_t original_width = 0;
  double scale = 1.0;
  std::size_t scaled_height = 0;
  std::size_t scaled_width = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_right = 0;

  std::size_t target_height() const { return scaled_height + pad_bottom; }
  std::size_t target_width() const { return scaled_width + pad_right; }
};

PadGeometry make_pad_geometry(std::size_t original_height, std::size_t original_width, std::size_t target_height,
                              std::size_t target_width);

/// Half-pixel-centered bilinear resize with edge clamping, per channel of [C x H x W].
Tensor resize_bilinear(const Tensor& chw, std::size_t height, std::size_t width);
Mask resize_nearest(const Mask& mask, std::size_t height, std::size_t width);

struct Padded {
  Tensor image;
  Mask mask;
  PadGeometry geometry;
};

/// Bilinear resize of the image, nearest resize of the mask, zero pad.
Padded resize_and_pad(const Tensor& image, const Mask& mask, std::size_t target_height, std::size_t target_width);
Tensor resize_and_pad_image(const Tensor& image, const PadGeometry& geometry);

/// Crops the padding and resizes scores [1 x H x W] back to [1 x H0 x W0].
Tensor map_back(const Tensor& high, const PadGeometry& geometry);

struct Overlap {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

Overlap overlap(const Mask& pred, const Mask& gt);
/// |pred & gt| / |pred | gt|; 1 when both are empty.
double iou(const Mask& pred, const Mask& gt);
double iou(const Overlap& o);

/// Fraction of ious >= threshold.
double precision_at(std::span<const double> ious, double threshold);

inline constexpr std::array<double, 5> kPrecisionThresholds{0.5, 0.6, 0.7, 0.8, 0.9};

/// Pooled intersection/union totals plus the per-sample IoU list.
class EvalAccumulator {
 public:
  void add(const Mask& pred, const Mask& gt) { add(overlap(pred, gt)); }
  void add(const Overlap& o);
  void merge(const EvalAccumulator& other);

  std::uint64_t total_intersection() const { return intersection_; }
  std::uint64_t total_union() const { return union_; }
  const std::vector<double>& ious() const { return ious_; }
  std::size_t samples() const { return ious_.size(); }

  /// Sum of intersections / sum of unions; 1 when every union was empty.
  double overall_iou() const;
  double precision_at(double threshold) const { return rseg::precision_at(ious_, threshold); }
  double mean_iou() const;

 private:
  std::uint64_t intersection_ = 0;
  std::uint64_t union_ = 0;
  std::vector<double> ious_;
};

struct EvalReport {
  std::string name;
  std::size_t samples = 0;
  double overall_iou = 0.0;
  std::array<double, 5> precision{};
  double mean_seconds = 0.0;
  double wall_seconds = 0.0;
  std::optional<double> fallback_rate;

  static EvalReport from(const std::string& name, const EvalAccumulator& acc, double wall_seconds);
  /// key=value lines opened by a "[record]" line.
  std::string to_text() const;
  static std::vector<EvalReport> parse(const std::string& text);
};

}  // namespace rseg
