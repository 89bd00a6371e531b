#include "lseg/data/summary.hpp"

#include <cmath>

namespace lseg::data {

std::vector<BandSummary> summarize_bands(std::span<const PatchSample> samples) {
  if (samples.empty()) throw DataError(DataError::Kind::kEmptySplit, "cannot summarize an empty split");
  const std::size_t bands = samples.front().bands();
  std::vector<double> sum(bands, 0.0), pos(bands, 0.0), neg(bands, 0.0);
  std::size_t count = 0, npos = 0, nneg = 0;
  for (const auto& s : samples) {
    if (s.bands() != bands) {
      throw DataError(DataError::Kind::kWrongChannelCount,
                      s.id + ": " + std::to_string(s.bands()) + " bands, expected " + std::to_string(bands));
    }
    const std::size_t pixels = s.height() * s.width();
    const float* px = s.image.data();
    for (std::size_t i = 0; i < pixels; ++i) {
      const int cls = s.mask ? (*s.mask)[i] : -1;
      for (std::size_t b = 0; b < bands; ++b) {
        const double v = px[i * bands + b];
        sum[b] += v;
        if (cls == 1) pos[b] += v;
        if (cls == 0) neg[b] += v;
      }
      npos += cls == 1;
      nneg += cls == 0;
    }
    count += pixels;
  }

  std::vector<BandSummary> out(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    out[b].band = static_cast<int>(b + 1);
    out[b].mean = sum[b] / static_cast<double>(count);
    out[b].landslide_mean = npos ? pos[b] / static_cast<double>(npos) : 0.0;
    out[b].background_mean = nneg ? neg[b] / static_cast<double>(nneg) : 0.0;
    out[b].landslide_pixels = npos;
    out[b].background_pixels = nneg;
  }
  std::vector<double> sq(bands, 0.0);
  for (const auto& s : samples) {
    const std::size_t n = s.height() * s.width() * bands;
    const float* px = s.image.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = px[i] - out[i % bands].mean;
      sq[i % bands] += d * d;
    }
  }
  for (std::size_t b = 0; b < bands; ++b) out[b].std = std::sqrt(sq[b] / static_cast<double>(count));
  return out;
}

nlohmann::ordered_json summary_json(std::span<const BandSummary> bands) {
  auto list = nlohmann::ordered_json::array();
  for (const auto& b : bands) {
    nlohmann::ordered_json j;
    j["band"] = b.band;
    j["mean"] = b.mean;
    j["std"] = b.std;
    j["landslide_mean"] = b.landslide_mean;
    j["background_mean"] = b.background_mean;
    j["separation"] = b.separation();
    list.push_back(std::move(j));
  }
  return list;
}

}  // namespace lseg::data
