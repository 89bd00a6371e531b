#include "lseg/service/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lseg::service {

namespace {

/// Value at fraction q of the sorted data, linear between neighbours.
double percentile(std::vector<float> values, double q) {
  if (values.empty()) return 0.0;
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  const double b = hi == lo ? a : *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (b - a) * (pos - static_cast<double>(lo));
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

Image rgb_composite(const data::PatchSample& sample, const std::array<int, 3>& rgb_bands) {
  const std::size_t h = sample.height(), w = sample.width(), bands = sample.bands();
  Image img{w, h, 3, std::vector<std::uint8_t>(h * w * 3)};
  for (std::size_t k = 0; k < 3; ++k) {
    const int band = rgb_bands[k];
    if (band < 1 || static_cast<std::size_t>(band) > bands) {
      throw data::DataError(data::DataError::Kind::kBadIndex, "display band " + std::to_string(band) + " not present");
    }
    std::vector<float> plane(h * w);
    for (std::size_t p = 0; p < h * w; ++p) plane[p] = sample.image[p * bands + static_cast<std::size_t>(band - 1)];
    const double lo = percentile(plane, 0.02);
    const double hi = percentile(plane, 0.98);
    const double span = hi - lo;
    for (std::size_t p = 0; p < h * w; ++p) {
      img.pixels[p * 3 + k] = span > 0.0 ? to_byte((plane[p] - lo) / span * 255.0) : 0;
    }
  }
  return img;
}

Image mask_image(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width) {
  if (mask.size() != height * width) throw ShapeError("mask size does not match extent");
  Image img{width, height, 1, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
  return img;
}

Image render_overlay(const Image& rgb, std::span<const std::uint8_t> mask, double alpha) {
  if (rgb.channels != 3) throw ShapeError("overlay needs an RGB image");
  if (mask.size() != rgb.width * rgb.height) {
    throw ShapeError("overlay: mask has " + std::to_string(mask.size()) + " pixels, image has " +
                     std::to_string(rgb.width * rgb.height));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("overlay alpha must lie in [0, 1]");
  static constexpr double kRed[3] = {255.0, 0.0, 0.0};
  Image out = rgb;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      out.pixels[p * 3 + k] = to_byte((1.0 - alpha) * rgb.pixels[p * 3 + k] + alpha * kRed[k]);
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("PNG encoder supports 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw ShapeError("PNG encoder: pixel buffer does not match extent");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = image.width * image.channels;
  for (std::size_t r = 0; r < image.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace lseg::service
