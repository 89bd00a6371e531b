#include "lseg/data/channels.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace lseg::data {

ChannelConfig ChannelConfig::six_channel() {
  ChannelConfig cfg;
  cfg.sources = {ChannelSource::band_of(4), ChannelSource::band_of(3),  ChannelSource::band_of(2),
                 ChannelSource::ndvi(),     ChannelSource::band_of(14), ChannelSource::band_of(13)};
  return cfg;
}

ChannelConfig ChannelConfig::passthrough(std::size_t bands) {
  ChannelConfig cfg;
  cfg.band_count = bands;
  for (std::size_t b = 1; b <= bands; ++b) cfg.sources.push_back(ChannelSource::band_of(static_cast<int>(b)));
  return cfg;
}

void ChannelConfig::validate() const {
  const auto in_range = [this](int b) { return b >= 1 && static_cast<std::size_t>(b) <= band_count; };
  if (sources.empty()) throw DataError(DataError::Kind::kBadIndex, "channel config selects no channels");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    if (s.kind == ChannelSource::Kind::kBand && !in_range(s.band)) {
      throw DataError(DataError::Kind::kBadIndex, "channel " + std::to_string(i) + ": band " + std::to_string(s.band) +
                                                      " outside 1.." + std::to_string(band_count));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (sources[j] == s) {
        throw DataError(DataError::Kind::kBadIndex, "channel " + std::to_string(i) + " duplicates channel " +
                                                        std::to_string(j));
      }
    }
  }
  const bool wants_ndvi = std::any_of(sources.begin(), sources.end(),
                                      [](const ChannelSource& s) { return s.kind == ChannelSource::Kind::kNdvi; });
  if (wants_ndvi && (!in_range(nir_band) || !in_range(red_band))) {
    throw DataError(DataError::Kind::kBadIndex, "NDVI bands outside 1.." + std::to_string(band_count));
  }
  for (int b : rgb_bands) {
    if (!in_range(b)) throw DataError(DataError::Kind::kBadIndex, "display band " + std::to_string(b) + " out of range");
  }
}

void to_json(nlohmann::json& j, const ChannelConfig& cfg) {
  auto sources = nlohmann::json::array();
  for (const auto& s : cfg.sources) {
    if (s.kind == ChannelSource::Kind::kNdvi) {
      sources.push_back("ndvi");
    } else {
      sources.push_back(s.band);
    }
  }
  j = nlohmann::json{{"sources", sources},
                     {"nir_band", cfg.nir_band},
                     {"red_band", cfg.red_band},
                     {"rgb_bands", cfg.rgb_bands},
                     {"band_count", cfg.band_count}};
}

void from_json(const nlohmann::json& j, ChannelConfig& cfg) {
  cfg = ChannelConfig{};
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "six") {
      cfg = ChannelConfig::six_channel();
    } else if (name == "all" || name == "passthrough") {
      cfg = ChannelConfig::passthrough();
    } else {
      throw DataError(DataError::Kind::kBadIndex, "unknown channel preset '" + name + "'");
    }
    return;
  }
  cfg.band_count = j.value("band_count", kBandCount);
  cfg.nir_band = j.value("nir_band", 8);
  cfg.red_band = j.value("red_band", 4);
  if (j.contains("rgb_bands")) cfg.rgb_bands = j.at("rgb_bands").get<std::array<int, 3>>();
  for (const auto& s : j.at("sources")) {
    if (s.is_string()) {
      if (s.get<std::string>() != "ndvi") {
        throw DataError(DataError::Kind::kBadIndex, "unknown derived channel '" + s.get<std::string>() + "'");
      }
      cfg.sources.push_back(ChannelSource::ndvi());
    } else {
      cfg.sources.push_back(ChannelSource::band_of(s.get<int>()));
    }
  }
}

namespace {

void require_band(const PatchSample& sample, int band) {
  if (band < 1 || static_cast<std::size_t>(band) > sample.bands()) {
    throw DataError(DataError::Kind::kBadIndex,
                    "band " + std::to_string(band) + " not present in a " + std::to_string(sample.bands()) + "-band patch");
  }
}

}  // namespace

Tensor compute_ndvi(const PatchSample& sample, int nir_band, int red_band) {
  require_band(sample, nir_band);
  require_band(sample, red_band);
  const std::size_t h = sample.height(), w = sample.width(), c = sample.bands();
  Tensor out({h, w});
  const float* img = sample.image.data();
  for (std::size_t p = 0; p < h * w; ++p) {
    const float nir = img[p * c + static_cast<std::size_t>(nir_band - 1)];
    const float red = img[p * c + static_cast<std::size_t>(red_band - 1)];
    const float v = (nir - red) / (nir + red + kNdviEpsilon);
    out[p] = std::isfinite(v) ? std::clamp(v, -1.0f, 1.0f) : 0.0f;
  }
  return out;
}

Tensor assemble_channels(const PatchSample& sample, const ChannelConfig& cfg) {
  cfg.validate();
  const std::size_t h = sample.height(), w = sample.width(), c = sample.bands();
  const std::size_t plane = h * w;
  Tensor out({cfg.channel_count(), h, w});
  const float* img = sample.image.data();
  for (std::size_t k = 0; k < cfg.sources.size(); ++k) {
    const auto& s = cfg.sources[k];
    float* dst = out.data() + k * plane;
    if (s.kind == ChannelSource::Kind::kNdvi) {
      const Tensor ndvi = compute_ndvi(sample, cfg.nir_band, cfg.red_band);
      std::copy_n(ndvi.data(), plane, dst);
    } else {
      require_band(sample, s.band);
      const std::size_t b = static_cast<std::size_t>(s.band - 1);
      for (std::size_t p = 0; p < plane; ++p) dst[p] = img[p * c + b];
    }
  }
  return out;
}

}  // namespace lseg::data
