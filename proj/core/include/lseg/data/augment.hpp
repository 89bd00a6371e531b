#pragma once

#include "lseg/data/patch.hpp"
#include "lseg/rng.hpp"

namespace lseg::data {

/// Element of the dihedral group of the square: an optional horizontal flip
/// followed by `quarter_turns` clockwise rotations.
struct Augmentation {
  bool hflip = false;
  int quarter_turns = 0;

  static Augmentation horizontal_flip() { return {true, 0}; }
  /// A vertical flip is a horizontal flip followed by a half turn.
  static Augmentation vertical_flip() { return {true, 2}; }
  static Augmentation rot90(int k = 1) { return {false, ((k % 4) + 4) % 4}; }

  bool is_identity() const noexcept { return !hflip && quarter_turns % 4 == 0; }
  friend bool operator==(const Augmentation&, const Augmentation&) = default;
};

/// Uniform draw over the 8 dihedral transforms.
Augmentation random_augmentation(Rng& rng);

/// Applies the transform to every image band and to the mask. A clockwise
/// quarter turn maps pixel (r, c) of an H x W grid to (c, H-1-r).
PatchSample augment(const PatchSample& sample, const Augmentation& op);

/// Same transform on a C x H x W model input or an N x C x H x W batch.
Tensor augment(const Tensor& chw, const Augmentation& op);

PatchSample hflip(const PatchSample& sample);
PatchSample vflip(const PatchSample& sample);
PatchSample rot90(const PatchSample& sample, int k = 1);

}  // namespace lseg::data
