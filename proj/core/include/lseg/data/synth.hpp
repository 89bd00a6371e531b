#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lseg/data/dataset.hpp"

namespace lseg::data {

inline constexpr double kSynthMinFraction = 0.02;
inline constexpr double kSynthMaxFraction = 0.4;

/// Generates `n` 14-band patches of `size` x `size` pixels with masks.
///
/// Masks are unions of random ellipses, redrawn until the landslide fraction
/// lies in [0.02, 0.4]. Backgrounds are smooth per-band fields plus noise.
/// Inside the mask NIR drops and red rises (so NDVI falls) and the slope band
/// rises. Ids are `<prefix>_0000`, `<prefix>_0001`, ...
std::vector<PatchSample> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed,
                                       const std::string& prefix = "synth");

struct SynthLayout {
  std::size_t train = 8;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t size = 64;
  std::uint64_t seed = 42;
};

/// Writes patches/<id>.h5 and manifest.json under `dir`. Validation and test
/// patches are drawn from independent streams and never share ids with the
/// training split.
Manifest write_synthetic_dataset(const std::filesystem::path& dir, const SynthLayout& layout);

}  // namespace lseg::data
