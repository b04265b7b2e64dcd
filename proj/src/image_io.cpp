#include "rseg/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace rseg {

namespace {

struct NetpbmHeader {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t maxval = 0;
};

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) fail("truncated header");
    return out;
  }

  std::size_t number() {
    const auto text = token();
    if (!std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      fail("non-numeric header field '" + text + "'");
    }
    return std::stoul(text);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing whitespace before raster");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ImageIoError(path_.string() + ": " + what); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_raster(const std::filesystem::path& path, const char* magic, std::size_t channels,
                                      std::size_t& width, std::size_t& height) {
  const auto bytes = read_all(path);
  HeaderReader header(bytes, path);
  if (header.token() != magic) header.fail(std::string("not a binary ") + (channels == 3 ? "PPM (P6)" : "PGM (P5)"));
  width = header.number();
  height = header.number();
  const auto maxval = header.number();
  if (width == 0 || height == 0) header.fail("zero image extent");
  if (maxval == 0 || maxval > 255) header.fail("unsupported maxval " + std::to_string(maxval));
  const auto start = header.raster_start();
  const auto count = width * height * channels;
  if (bytes.size() < start + count) header.fail("truncated raster");
  std::vector<std::uint8_t> raster(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(start + count));
  if (maxval != 255) {
    for (auto& v : raster) {
      if (v > maxval) header.fail("sample exceeds maxval");
      v = static_cast<std::uint8_t>(std::lround(255.0 * v / static_cast<double>(maxval)));
    }
  }
  return raster;
}

void write_raster(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  const std::vector<std::uint8_t>& raster, const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << magic << '\n';
  if (!comment.empty()) out << "# " << comment << '\n';
  out << width << ' ' << height << '\n' << 255 << '\n';
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw ImageIoError("failed writing " + path.string());
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.pixels.size() != 3 * image.width * image.height) throw ImageIoError("RGB buffer size mismatch");
  write_raster(path, "P6", image.width, image.height, image.pixels, {});
}

RgbImage read_ppm(const std::filesystem::path& path) {
  RgbImage image;
  image.pixels = read_raster(path, "P6", 3, image.width, image.height);
  return image;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image, const std::string& comment) {
  if (image.pixels.size() != image.width * image.height) throw ImageIoError("gray buffer size mismatch");
  if (comment.find('\n') != std::string::npos) throw ImageIoError("PGM comment must be a single line");
  write_raster(path, "P5", image.width, image.height, image.pixels, comment);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  GrayImage image;
  image.pixels = read_raster(path, "P5", 1, image.width, image.height);
  return image;
}

Tensor to_tensor(const RgbImage& image) {
  const auto plane = image.width * image.height;
  std::vector<double> data(3 * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) data[c * plane + p] = image.pixels[3 * p + c] / 255.0;
  return Tensor({3, image.height, image.width}, std::move(data));
}

RgbImage to_rgb(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw DimensionError("to_rgb: expected [3 x H x W], got " + shape_str(chw.shape()));
  RgbImage image{chw.dim(2), chw.dim(1), {}};
  const auto plane = image.width * image.height;
  image.pixels.resize(3 * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      image.pixels[3 * p + c] = static_cast<std::uint8_t>(std::lround(std::clamp(chw[c * plane + p], 0.0, 1.0) * 255.0));
  return image;
}

Mask to_mask(const GrayImage& image) {
  Mask mask(image.height, image.width);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto v = image.pixels[i];
    if (v != 0 && v != 255) {
      throw ImageIoError("mask pixel " + std::to_string(i) + " has non-binary value " + std::to_string(v));
    }
    mask.bits[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

GrayImage to_gray(const Mask& mask) {
  GrayImage image{mask.width, mask.height, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) image.pixels[i] = mask.bits[i] ? 255 : 0;
  return image;
}

}  // namespace rseg
