#include "rseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rseg {

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

// Half-pixel-centered source coordinate for output index i, clamped to the grid.
Tap bilinear_tap(std::size_t i, std::size_t in_extent, std::size_t out_extent) {
  double src = (static_cast<double>(i) + 0.5) * static_cast<double>(in_extent) / static_cast<double>(out_extent) - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_extent - 1));
  const auto lo = static_cast<std::size_t>(std::floor(src));
  const auto hi = std::min(lo + 1, in_extent - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

PadGeometry make_pad_geometry(std::size_t original_height, std::size_t original_width, std::size_t target_height,
                              std::size_t target_width) {
  if (original_height == 0 || original_width == 0) throw ContractError("resize_and_pad: degenerate original size");
  if (target_height == 0 || target_width == 0) throw ContractError("resize_and_pad: degenerate target size");
  PadGeometry g;
  g.original_height = original_height;
  g.original_width = original_width;
  g.scale = std::min(static_cast<double>(target_width) / static_cast<double>(original_width),
                     static_cast<double>(target_height) / static_cast<double>(original_height));
  auto scaled = [&](std::size_t extent, std::size_t target) {
    const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(extent) * g.scale));
    return std::clamp<std::size_t>(v, 1, target);
  };
  g.scaled_height = scaled(original_height, target_height);
  g.scaled_width = scaled(original_width, target_width);
  g.pad_bottom = target_height - g.scaled_height;
  g.pad_right = target_width - g.scaled_width;
  return g;
}

Tensor resize_bilinear(const Tensor& chw, std::size_t height, std::size_t width) {
  if (chw.rank() != 3) throw DimensionError("resize_bilinear: expected [C x H x W], got " + shape_str(chw.shape()));
  const auto channels = chw.dim(0), in_h = chw.dim(1), in_w = chw.dim(2);
  if (in_h == height && in_w == width) return chw.clone();
  std::vector<Tap> rows(height), cols(width);
  for (std::size_t y = 0; y < height; ++y) rows[y] = bilinear_tap(y, in_h, height);
  for (std::size_t x = 0; x < width; ++x) cols[x] = bilinear_tap(x, in_w, width);
  std::vector<double> out(channels * height * width);
  const auto src = chw.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = src.data() + c * in_h * in_w;
    for (std::size_t y = 0; y < height; ++y) {
      const auto& r = rows[y];
      for (std::size_t x = 0; x < width; ++x) {
        const auto& q = cols[x];
        const double top = plane[r.lo * in_w + q.lo] * (1 - q.frac) + plane[r.lo * in_w + q.hi] * q.frac;
        const double bottom = plane[r.hi * in_w + q.lo] * (1 - q.frac) + plane[r.hi * in_w + q.hi] * q.frac;
        out[(c * height + y) * width + x] = top * (1 - r.frac) + bottom * r.frac;
      }
    }
  }
  return Tensor({channels, height, width}, std::move(out));
}

Mask resize_nearest(const Mask& mask, std::size_t height, std::size_t width) {
  if (mask.height == height && mask.width == width) return mask;
  Mask out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const auto ry = std::min(mask.height - 1, static_cast<std::size_t>((static_cast<double>(y) + 0.5) *
                                                                       static_cast<double>(mask.height) /
                                                                       static_cast<double>(height)));
    for (std::size_t x = 0; x < width; ++x) {
      const auto rx = std::min(mask.width - 1, static_cast<std::size_t>((static_cast<double>(x) + 0.5) *
                                                                        static_cast<double>(mask.width) /
                                                                        static_cast<double>(width)));
      out.at(y, x) = mask.at(ry, rx);
    }
  }
  return out;
}

Tensor resize_and_pad_image(const Tensor& image, const PadGeometry& g) {
  if (image.rank() != 3 || image.dim(1) != g.original_height || image.dim(2) != g.original_width) {
    throw DimensionError("resize_and_pad: image " + shape_str(image.shape()) + " does not match geometry");
  }
  const auto scaled = resize_bilinear(image, g.scaled_height, g.scaled_width);
  const auto channels = image.dim(0), h = g.target_height(), w = g.target_width();
  std::vector<double> out(channels * h * w, 0.0);
  const auto src = scaled.data();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < g.scaled_height; ++y)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((c * g.scaled_height + y) * g.scaled_width),
                  g.scaled_width, out.begin() + static_cast<std::ptrdiff_t>((c * h + y) * w));
  return Tensor({channels, h, w}, std::move(out));
}

Padded resize_and_pad(const Tensor& image, const Mask& mask, std::size_t target_height, std::size_t target_width) {
  if (image.rank() != 3) throw DimensionError("resize_and_pad: expected [C x H x W], got " + shape_str(image.shape()));
  if (mask.height != image.dim(1) || mask.width != image.dim(2)) {
    throw DimensionError("resize_and_pad: mask extent differs from image extent");
  }
  const auto g = make_pad_geometry(image.dim(1), image.dim(2), target_height, target_width);
  const auto scaled = resize_nearest(mask, g.scaled_height, g.scaled_width);
  Mask padded(target_height, target_width);
  for (std::size_t y = 0; y < g.scaled_height; ++y)
    for (std::size_t x = 0; x < g.scaled_width; ++x) padded.at(y, x) = scaled.at(y, x);
  return {resize_and_pad_image(image, g), std::move(padded), g};
}

Tensor map_back(const Tensor& high, const PadGeometry& g) {
  if (high.rank() != 3 || high.dim(1) != g.target_height() || high.dim(2) != g.target_width()) {
    throw DimensionError("map_back: map " + shape_str(high.shape()) + " does not match padded size " +
                         std::to_string(g.target_height()) + "x" + std::to_string(g.target_width()));
  }
  const auto channels = high.dim(0), w = high.dim(2);
  std::vector<double> cropped(channels * g.scaled_height * g.scaled_width);
  const auto src = high.data();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < g.scaled_height; ++y)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((c * high.dim(1) + y) * w), g.scaled_width,
                  cropped.begin() + static_cast<std::ptrdiff_t>((c * g.scaled_height + y) * g.scaled_width));
  return resize_bilinear(Tensor({channels, g.scaled_height, g.scaled_width}, std::move(cropped)), g.original_height,
                         g.original_width);
}

Overlap overlap(const Mask& pred, const Mask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw DimensionError("iou: mask extents differ (" + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                         " vs " + std::to_string(gt.height) + "x" + std::to_string(gt.width) + ")");
  }
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    o.intersection += pred.bits[i] & gt.bits[i];
    o.union_ += pred.bits[i] | gt.bits[i];
  }
  return o;
}

double iou(const Overlap& o) {
  if (o.union_ == 0) return 1.0;
  return static_cast<double>(o.intersection) / static_cast<double>(o.union_);
}

double iou(const Mask& pred, const Mask& gt) { return iou(overlap(pred, gt)); }

double precision_at(std::span<const double> ious, double threshold) {
  if (ious.empty()) throw ContractError("precision_at: no samples");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("precision_at: threshold must lie in (0, 1)");
  const auto hits = std::count_if(ious.begin(), ious.end(), [&](double v) { return v >= threshold; });
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

void EvalAccumulator::add(const Overlap& o) {
  intersection_ += o.intersection;
  union_ += o.union_;
  ious_.push_back(iou(o));
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  intersection_ += other.intersection_;
  union_ += other.union_;
  ious_.insert(ious_.end(), other.ious_.begin(), other.ious_.end());
}

double EvalAccumulator::overall_iou() const {
  if (ious_.empty()) throw ContractError("overall_iou: no samples");
  if (union_ == 0) return 1.0;
  return static_cast<double>(intersection_) / static_cast<double>(union_);
}

double EvalAccumulator::mean_iou() const {
  if (ious_.empty()) throw ContractError("mean_iou: no samples");
  double total = 0.0;
  for (double v : ious_) total += v;
  return total / static_cast<double>(ious_.size());
}

EvalReport EvalReport::from(const std::string& name, const EvalAccumulator& acc, double wall_seconds) {
  EvalReport r;
  r.name = name;
  r.samples = acc.samples();
  r.overall_iou = acc.overall_iou();
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) r.precision[i] = acc.precision_at(kPrecisionThresholds[i]);
  r.wall_seconds = wall_seconds;
  r.mean_seconds = r.samples ? wall_seconds / static_cast<double>(r.samples) : 0.0;
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "[record]\n";
  os << "name=" << name << '\n';
  os << "samples=" << samples << '\n';
  os << "overall_iou=" << format_double(overall_iou) << '\n';
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "precision@%.1f", kPrecisionThresholds[i]);
    os << key << '=' << format_double(precision[i]) << '\n';
  }
  if (fallback_rate) os << "fallback_rate=" << format_double(*fallback_rate) << '\n';
  os << "mean_time_s=" << format_double(mean_seconds) << '\n';
  os << "wall_time_s=" << format_double(wall_seconds) << '\n';
  return os.str();
}

std::vector<EvalReport> EvalReport::parse(const std::string& text) {
  std::vector<EvalReport> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line == "[record]") {
      out.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || out.empty()) continue;
    const auto key = line.substr(0, eq), value = line.substr(eq + 1);
    auto& r = out.back();
    if (key == "name") r.name = value;
    else if (key == "samples") r.samples = std::stoul(value);
    else if (key == "overall_iou") r.overall_iou = std::stod(value);
    else if (key == "fallback_rate") r.fallback_rate = std::stod(value);
    else if (key == "mean_time_s") r.mean_seconds = std::stod(value);
    else if (key == "wall_time_s") r.wall_seconds = std::stod(value);
    else {
      for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) {
        char expected[32];
        std::snprintf(expected, sizeof expected, "precision@%.1f", kPrecisionThresholds[i]);
        if (key == expected) r.precision[i] = std::stod(value);
      }
    }
  }
  return out;
}

}  // namespace rseg
