#include "lseg/data/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace lseg::data {

namespace {

// Typical reflectance of vegetated terrain for B1..B12, then DEM and slope.
constexpr std::array<double, kBandCount> kBaseLevel = {0.12, 0.10, 0.09, 0.08, 0.12, 0.22, 0.28,
                                                       0.35, 0.30, 0.05, 0.20, 0.14, 0.60, 0.20};
// Shift applied inside landslide pixels: exposed soil and rock.
constexpr std::array<double, kBandCount> kLandslideShift = {0.0,  0.04, 0.04, 0.06, 0.0,  0.0,  0.0,
                                                            -0.12, 0.0, 0.0,  0.05, 0.05, -0.05, 0.25};

std::vector<std::uint8_t> draw_mask(std::size_t size, Rng& rng) {
  const double s = static_cast<double>(size);
  std::vector<std::uint8_t> mask(size * size);
  for (;;) {
    std::fill(mask.begin(), mask.end(), std::uint8_t{0});
    const auto blobs = 1 + rng.below(3);
    for (std::uint64_t b = 0; b < blobs; ++b) {
      const double cy = rng.uniform(0.1, 0.9) * s, cx = rng.uniform(0.1, 0.9) * s;
      const double ry = rng.uniform(0.06, 0.3) * s, rx = rng.uniform(0.06, 0.3) * s;
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double ct = std::cos(theta), st = std::sin(theta);
      for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
          const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
          const double u = (dx * ct + dy * st) / rx, v = (-dx * st + dy * ct) / ry;
          if (u * u + v * v <= 1.0) mask[r * size + c] = 1;
        }
      }
    }
    std::size_t ones = 0;
    for (auto m : mask) ones += m;
    const double fraction = static_cast<double>(ones) / static_cast<double>(mask.size());
    if (fraction >= kSynthMinFraction && fraction <= kSynthMaxFraction) return mask;
  }
}

PatchSample draw_sample(std::string id, std::size_t size, Rng& rng) {
  PatchSample sample;
  sample.id = std::move(id);
  sample.provenance = Provenance::kSynthetic;
  sample.mask = draw_mask(size, rng);
  sample.image = Tensor({size, size, kBandCount});
  const double s = static_cast<double>(size);
  for (std::size_t b = 0; b < kBandCount; ++b) {
    // Two low-frequency waves give each band a smooth, patch-specific field.
    const double fy1 = rng.uniform(0.5, 2.0), fx1 = rng.uniform(0.5, 2.0), p1 = rng.uniform(0.0, 6.3);
    const double fy2 = rng.uniform(0.5, 2.0), fx2 = rng.uniform(0.5, 2.0), p2 = rng.uniform(0.0, 6.3);
    const double amp = 0.02 + 0.02 * rng.uniform();
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double y = static_cast<double>(r) / s * 2.0 * std::numbers::pi;
        const double x = static_cast<double>(c) / s * 2.0 * std::numbers::pi;
        double v = kBaseLevel[b] + amp * (std::sin(fy1 * y + fx1 * x + p1) + std::cos(fy2 * y - fx2 * x + p2)) / 2.0;
        if ((*sample.mask)[r * size + c]) v += kLandslideShift[b];
        v += 0.01 * rng.normal();
        sample.image[(r * size + c) * kBandCount + b] = static_cast<float>(std::max(v, 0.0));
      }
    }
  }
  return sample;
}

std::string synth_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return prefix + buf;
}

}  // namespace

std::vector<PatchSample> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed, const std::string& prefix) {
  if (size == 0) throw DataError(DataError::Kind::kWrongSize, "synthetic patch size must be positive");
  Rng root(seed);
  std::vector<PatchSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng stream = root.split();
    out.push_back(draw_sample(synth_id(prefix, i), size, stream));
  }
  return out;
}

Manifest write_synthetic_dataset(const std::filesystem::path& dir, const SynthLayout& layout) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "patches");
  Manifest manifest;
  manifest.dataset = "synthetic";
  manifest.root = dir;
  const auto emit = [&](const char* split, std::size_t n, std::uint64_t seed, const std::string& prefix) {
    auto& entries = manifest.splits[split];
    for (const auto& s : synth_dataset(n, layout.size, seed, prefix)) {
      const fs::path rel = fs::path("patches") / (s.id + ".h5");
      write_patch(dir / rel, s);
      entries.push_back({s.id, rel, std::nullopt});
    }
  };
  emit(kTrainSplit, layout.train, layout.seed, "synth");
  if (layout.validation > 0) emit(kValidationSplit, layout.validation, layout.seed ^ 0x5641ULL, "synth_val");
  if (layout.test > 0) emit(kTestSplit, layout.test, layout.seed ^ 0x54455354ULL, "synth_test");
  save_manifest(dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace lseg::data
