#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <vector>

#include "lseg/data/channels.hpp"

namespace lseg::data {

/// Per-channel z-score statistics over assembled model inputs.
struct BandStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t channel_count() const noexcept { return mean.size(); }
  friend bool operator==(const BandStats&, const BandStats&) = default;
};

void to_json(nlohmann::json& j, const BandStats& stats);
void from_json(const nlohmann::json& j, BandStats& stats);

/// Mean and population standard deviation of every assembled channel,
/// pooled over all pixels of all samples.
BandStats fit_band_stats(std::span<const PatchSample> samples, const ChannelConfig& cfg);

/// Same, over already assembled C x H x W (or N x C x H x W) inputs.
BandStats fit_band_stats(std::span<const Tensor> inputs);

/// (x - mean) / std per channel; channels with std == 0 map to 0.
/// Accepts C x H x W or N x C x H x W. Throws ShapeError on channel mismatch.
Tensor normalize(const Tensor& x, const BandStats& stats);

/// Inverse of normalize for channels with std > 0.
Tensor denormalize(const Tensor& x, const BandStats& stats);

}  // namespace lseg::data
