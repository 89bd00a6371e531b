#pragma once

#include <cstdint>
#include <span>

#include "lseg/tensor.hpp"

namespace lseg::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Pixel tallies of a binary prediction against a binary target. Throws
/// std::invalid_argument on a value outside {0, 1} and ShapeError on a
/// length mismatch.
ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target);

template <std::floating_point T>
ConfusionCounts confusion(const BasicTensor<T>& pred, const BasicTensor<T>& target);

// Ratios with an empty denominator are 1 when TP = FP = FN = 0 (nothing to
// find and nothing claimed) and 0 otherwise.
double precision(const ConfusionCounts& c) noexcept;
double recall(const ConfusionCounts& c) noexcept;
double f1(const ConfusionCounts& c) noexcept;
double iou(const ConfusionCounts& c) noexcept;

/// Harmonic mean 2PR / (P + R); 0 when P + R = 0.
double f1_from(double precision, double recall) noexcept;

struct Metrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics metrics_of(const ConfusionCounts& c) noexcept;

/// Arithmetic mean of per-patch metrics.
Metrics macro_average(std::span<const ConfusionCounts> per_patch);
/// Metrics of the pooled counts.
Metrics micro_average(std::span<const ConfusionCounts> per_patch) noexcept;

}  // namespace lseg::metrics
