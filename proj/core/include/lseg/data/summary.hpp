#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "lseg/data/patch.hpp"

namespace lseg::data {

/// Per-band statistics of raw patches, split by mask class.
struct BandSummary {
  int band = 0;  // 1-based
  double mean = 0.0;
  double std = 0.0;
  double landslide_mean = 0.0;
  double background_mean = 0.0;
  std::size_t landslide_pixels = 0;
  std::size_t background_pixels = 0;

  double separation() const noexcept { return landslide_mean - background_mean; }
};

/// Summaries for every band of `samples`. Class means are 0 when a class has
/// no pixels; samples without masks only contribute to mean and std.
std::vector<BandSummary> summarize_bands(std::span<const PatchSample> samples);

nlohmann::ordered_json summary_json(std::span<const BandSummary> bands);

}  // namespace lseg::data
