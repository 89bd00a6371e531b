#include "lseg/service/predictor.hpp"

#include <bit>
#include <stdexcept>

namespace lseg::service {

const Tensor& InputCache::assembled(const data::ChannelConfig& cfg) {
  for (const auto& [key, value] : entries_) {
    if (key == cfg) return value;
  }
  entries_.emplace_back(cfg, data::assemble_channels(sample_, cfg));
  return entries_.back().second;
}

std::vector<std::uint8_t> Prediction::probability_payload() const {
  std::vector<std::uint8_t> out(probs.size() * 4);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(probs[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

nlohmann::ordered_json Prediction::sidecar() const {
  nlohmann::ordered_json j;
  j["shape"] = {height, width};
  j["dtype"] = "f32le";
  j["threshold"] = threshold;
  j["model"] = model_id;
  return j;
}

Prediction predict(const models::Checkpoint& checkpoint, const data::PatchSample& sample, const std::string& model_id,
                   std::optional<double> threshold, InputCache* cache, double overlay_alpha) {
  const double thr = threshold.value_or(checkpoint.model.spec().threshold);
  if (!(thr >= 0.0 && thr <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
  const std::size_t h = sample.height(), w = sample.width();

  const Tensor input = cache ? cache->assembled(checkpoint.channels) : data::assemble_channels(sample, checkpoint.channels);
  const Tensor x = data::normalize(input, checkpoint.band_stats).reshaped({1, input.dim(0), h, w});

  Prediction p;
  p.model_id = model_id;
  p.threshold = thr;
  p.height = h;
  p.width = w;
  p.probs = checkpoint.model.forward(x).reshaped({h, w});
  p.mask = models::predict_mask_bytes(p.probs, thr);
  std::size_t ones = 0;
  for (auto m : p.mask) ones += m;
  p.landslide_fraction = p.mask.empty() ? 0.0 : static_cast<double>(ones) / static_cast<double>(p.mask.size());
  p.rgb = rgb_composite(sample, checkpoint.channels.rgb_bands);
  p.mask_image = service::mask_image(p.mask, h, w);
  p.overlay = render_overlay(p.rgb, p.mask, overlay_alpha);
  return p;
}

}  // namespace lseg::service
