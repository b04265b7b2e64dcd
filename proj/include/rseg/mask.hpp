#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rseg {

/// Binary H x W mask, row-major, one byte per pixel holding 0 or 1.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), bits(h * w, fill) {}

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits[row * width + col]; }
  std::uint8_t& at(std::size_t row, std::size_t col) { return bits[row * width + col]; }
  std::size_t size() const { return bits.size(); }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }

  bool operator==(const Mask&) const = default;
};

}  // namespace rseg
