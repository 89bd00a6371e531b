#pragma once

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "lseg/data/patch.hpp"

namespace lseg::data {

/// One model input channel: a source band (1-based) or a derived NDVI plane.
struct ChannelSource {
  enum class Kind { kBand, kNdvi };
  Kind kind = Kind::kBand;
  int band = 1;

  static ChannelSource band_of(int b) { return {Kind::kBand, b}; }
  static ChannelSource ndvi() { return {Kind::kNdvi, 0}; }
  friend bool operator==(const ChannelSource&, const ChannelSource&) = default;
};

/// Maps the on-disk bands of a patch to model input channels.
///
/// Band numbering follows the Landslide4Sense layout: 1..12 are Sentinel-2
/// B1..B12 (so 2/3/4 = blue/green/red, 8 = NIR), 13 is the DEM and 14 the
/// slope layer.
struct ChannelConfig {
  std::vector<ChannelSource> sources;
  int nir_band = 8;
  int red_band = 4;
  /// Source bands used for the red/green/blue display composite.
  std::array<int, 3> rgb_bands{4, 3, 2};
  std::size_t band_count = kBandCount;

  /// red, green, blue, NDVI, slope, DEM.
  static ChannelConfig six_channel();
  /// Bands 1..n unchanged.
  static ChannelConfig passthrough(std::size_t bands = kBandCount);

  std::size_t channel_count() const noexcept { return sources.size(); }
  /// Throws DataError(kBadIndex) for out-of-range or duplicated sources.
  void validate() const;

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

void to_json(nlohmann::json& j, const ChannelConfig& cfg);
void from_json(const nlohmann::json& j, ChannelConfig& cfg);

inline constexpr float kNdviEpsilon = 1e-8f;

/// (NIR - Red) / (NIR + Red + eps), clamped to [-1, 1]. Returns an H x W
/// plane. Bands are 1-based.
Tensor compute_ndvi(const PatchSample& sample, int nir_band = 8, int red_band = 4);

/// Builds the C_model x H x W model input for one patch in config order.
Tensor assemble_channels(const PatchSample& sample, const ChannelConfig& cfg);

}  // namespace lseg::data
