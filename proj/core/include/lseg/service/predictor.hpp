#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lseg/models/checkpoint.hpp"
#include "lseg/service/render.hpp"

namespace lseg::service {

/// Assembled (not yet normalized) inputs of one upload, keyed by channel
/// configuration, so models sharing a configuration share the work.
class InputCache {
 public:
  explicit InputCache(const data::PatchSample& sample) : sample_(sample) {}
  const Tensor& assembled(const data::ChannelConfig& cfg);
  const data::PatchSample& sample() const noexcept { return sample_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  const data::PatchSample& sample_;
  std::vector<std::pair<data::ChannelConfig, Tensor>> entries_;
};

struct Prediction {
  std::string model_id;
  double threshold = 0.5;
  std::size_t height = 0;
  std::size_t width = 0;
  /// H x W probabilities.
  Tensor probs;
  std::vector<std::uint8_t> mask;
  double landslide_fraction = 0.0;
  Image rgb;
  Image mask_image;
  Image overlay;

  /// Raw probabilities: float32 little-endian, row-major H x W.
  std::vector<std::uint8_t> probability_payload() const;
  /// {"shape":[H,W],"dtype":"f32le","threshold":t,"model":id}
  nlohmann::ordered_json sidecar() const;
};

/// Runs one checkpoint on one patch: channel assembly, normalization with the
/// stored statistics, eval-mode forward, thresholding and rendering. The
/// threshold defaults to the checkpoint's configured value.
Prediction predict(const models::Checkpoint& checkpoint, const data::PatchSample& sample, const std::string& model_id,
                   std::optional<double> threshold = std::nullopt, InputCache* cache = nullptr,
                   double overlay_alpha = 0.5);

}  // namespace lseg::service
