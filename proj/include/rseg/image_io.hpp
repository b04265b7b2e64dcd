#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "rseg/mask.hpp"
#include "rseg/tensor.hpp"

namespace rseg {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height
};

/// 8-bit grayscale.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Binary netpbm: P6 for RGB, P5 for gray, maxval 255 on write. Readers accept
// header comments and any maxval up to 255 (samples are rescaled to 0..255).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);
/// `comment`, if non-empty, is written as a single "# ..." header line.
void write_pgm(const std::filesystem::path& path, const GrayImage& image, const std::string& comment = {});
GrayImage read_pgm(const std::filesystem::path& path);

/// [3 x H x W] tensor with values v / 255.
Tensor to_tensor(const RgbImage& image);
/// Clamps to [0, 1] and rounds to the nearest 8-bit level.
RgbImage to_rgb(const Tensor& chw);

/// 0 -> background, 255 -> foreground; any other value is an error.
Mask to_mask(const GrayImage& image);
GrayImage to_gray(const Mask& mask);

}  // namespace rseg
