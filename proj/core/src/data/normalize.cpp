#include "lseg/data/normalize.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace lseg::data {

void to_json(nlohmann::json& j, const BandStats& stats) {
  j = nlohmann::json{{"mean", stats.mean}, {"std", stats.std}};
}

void from_json(const nlohmann::json& j, BandStats& stats) {
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.std = j.at("std").get<std::vector<double>>();
  if (stats.mean.size() != stats.std.size()) {
    throw ShapeError("band stats: mean has " + std::to_string(stats.mean.size()) + " entries, std has " +
                     std::to_string(stats.std.size()));
  }
  for (double s : stats.std) {
    if (!(s >= 0.0)) throw ShapeError("band stats: std must be non-negative");
  }
}

namespace {

struct Layout {
  std::size_t batch, channels, plane;
};

Layout layout_of(const Tensor& x) {
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1) * x.dim(2)};
  if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
  throw ShapeError("expected C x H x W or N x C x H x W input, got " + lseg::to_string(x.shape()));
}

// Two-pass accumulation in double keeps the variance non-negative and stable.
BandStats accumulate_stats(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw DataError(DataError::Kind::kEmptySplit, "cannot fit band stats on an empty split");
  const std::size_t channels = layout_of(inputs.front()).channels;
  std::vector<double> sum(channels, 0.0);
  std::size_t count = 0;
  for (const auto& x : inputs) {
    const auto l = layout_of(x);
    if (l.channels != channels) {
      throw ShapeError("band stats: inconsistent channel counts " + std::to_string(channels) + " and " +
                       std::to_string(l.channels));
    }
    for (std::size_t n = 0; n < l.batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        const float* p = x.data() + (n * channels + c) * l.plane;
        for (std::size_t i = 0; i < l.plane; ++i) sum[c] += p[i];
      }
    }
    count += l.batch * l.plane;
  }
  BandStats stats;
  stats.mean.resize(channels);
  stats.std.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  for (const auto& x : inputs) {
    const auto l = layout_of(x);
    for (std::size_t n = 0; n < l.batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        const float* p = x.data() + (n * channels + c) * l.plane;
        for (std::size_t i = 0; i < l.plane; ++i) {
          const double d = p[i] - stats.mean[c];
          stats.std[c] += d * d;
        }
      }
    }
  }
  for (auto& s : stats.std) s = std::sqrt(s / static_cast<double>(count));
  return stats;
}

template <class Fn>
Tensor per_channel(const Tensor& x, const BandStats& stats, Fn fn) {
  const auto l = layout_of(x);
  if (l.channels != stats.channel_count()) {
    throw ShapeError("input has " + std::to_string(l.channels) + " channels, band stats describe " +
                     std::to_string(stats.channel_count()));
  }
  Tensor out(x.shape());
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t base = (n * l.channels + c) * l.plane;
      for (std::size_t i = 0; i < l.plane; ++i) {
        out[base + i] = static_cast<float>(fn(static_cast<double>(x[base + i]), stats.mean[c], stats.std[c]));
      }
    }
  }
  return out;
}

}  // namespace

BandStats fit_band_stats(std::span<const Tensor> inputs) { return accumulate_stats(inputs); }

BandStats fit_band_stats(std::span<const PatchSample> samples, const ChannelConfig& cfg) {
  std::vector<Tensor> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(assemble_channels(s, cfg));
  return accumulate_stats(inputs);
}

Tensor normalize(const Tensor& x, const BandStats& stats) {
  return per_channel(x, stats, [](double v, double m, double s) { return s > 0.0 ? (v - m) / s : 0.0; });
}

Tensor denormalize(const Tensor& x, const BandStats& stats) {
  return per_channel(x, stats, [](double v, double m, double s) { return s > 0.0 ? v * s + m : m; });
}

}  // namespace lseg::data
