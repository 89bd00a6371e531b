#include "lseg/data/augment.hpp"

#include <utility>
#include <vector>

namespace lseg::data {

namespace {

struct PixelMap {
  std::size_t height = 0, width = 0;
  /// Source pixel (row-major in the input grid) for each output pixel.
  std::vector<std::size_t> source;
};

PixelMap build_map(std::size_t h, std::size_t w, const Augmentation& op) {
  // Track where each source pixel lands, then invert.
  std::size_t cur_h = h, cur_w = w;
  std::vector<std::pair<std::size_t, std::size_t>> pos(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) pos[r * w + c] = {r, c};
  }
  if (op.hflip) {
    for (auto& [r, c] : pos) c = cur_w - 1 - c;
  }
  const int turns = ((op.quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    for (auto& [r, c] : pos) {
      const std::size_t nr = c, nc = cur_h - 1 - r;
      r = nr;
      c = nc;
    }
    std::swap(cur_h, cur_w);
  }
  PixelMap map{cur_h, cur_w, std::vector<std::size_t>(h * w)};
  for (std::size_t i = 0; i < pos.size(); ++i) map.source[pos[i].first * cur_w + pos[i].second] = i;
  return map;
}

}  // namespace

Augmentation random_augmentation(Rng& rng) {
  const auto k = rng.below(8);
  return {k >= 4, static_cast<int>(k % 4)};
}

PatchSample augment(const PatchSample& sample, const Augmentation& op) {
  if (op.is_identity()) return sample;
  const std::size_t h = sample.height(), w = sample.width(), bands = sample.bands();
  const auto map = build_map(h, w, op);
  PatchSample out = sample;
  out.image = Tensor({map.height, map.width, bands});
  const float* src = sample.image.data();
  float* dst = out.image.data();
  for (std::size_t p = 0; p < map.source.size(); ++p) {
    const std::size_t s = map.source[p];
    for (std::size_t b = 0; b < bands; ++b) dst[p * bands + b] = src[s * bands + b];
  }
  if (sample.mask) {
    std::vector<std::uint8_t> mask(map.source.size());
    for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = (*sample.mask)[map.source[p]];
    out.mask = std::move(mask);
  }
  return out;
}

Tensor augment(const Tensor& x, const Augmentation& op) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError("augment expects C x H x W or N x C x H x W, got " + lseg::to_string(x.shape()));
  }
  if (op.is_identity()) return x;
  const std::size_t planes = x.rank() == 3 ? x.dim(0) : x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  const auto map = build_map(h, w, op);
  Shape shape = x.shape();
  shape[shape.size() - 2] = map.height;
  shape[shape.size() - 1] = map.width;
  Tensor out(shape);
  const std::size_t plane = h * w;
  for (std::size_t k = 0; k < planes; ++k) {
    const float* src = x.data() + k * plane;
    float* dst = out.data() + k * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = src[map.source[p]];
  }
  return out;
}

PatchSample hflip(const PatchSample& sample) { return augment(sample, Augmentation::horizontal_flip()); }
PatchSample vflip(const PatchSample& sample) { return augment(sample, Augmentation::vertical_flip()); }
PatchSample rot90(const PatchSample& sample, int k) { return augment(sample, Augmentation::rot90(k)); }

}  // namespace lseg::data
