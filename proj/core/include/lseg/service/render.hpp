#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lseg/data/channels.hpp"

namespace lseg::service {

/// 8-bit image, row-major, `channels` interleaved samples per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image&, const Image&) = default;
};

/// Display composite from the configured red/green/blue source bands. Each
/// band is stretched linearly between its 2nd and 98th percentile.
Image rgb_composite(const data::PatchSample& sample, const std::array<int, 3>& rgb_bands);

/// Grayscale image: 255 for landslide pixels, 0 elsewhere.
Image mask_image(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width);

/// Blends pure red into `rgb` at mask pixels: out = (1 - alpha) * rgb +
/// alpha * (255, 0, 0), rounded to nearest. Throws ShapeError on an extent
/// mismatch.
Image render_overlay(const Image& rgb, std::span<const std::uint8_t> mask, double alpha = 0.5);

/// Lossless PNG encoding (no timestamps, so output depends only on pixels).
std::vector<std::uint8_t> encode_png(const Image& image);

}  // namespace lseg::service
