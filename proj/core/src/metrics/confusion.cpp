#include "lseg/metrics/confusion.hpp"

#include <stdexcept>
#include <string>

namespace lseg::metrics {

namespace {

bool perfect_empty(const ConfusionCounts& c) noexcept { return c.tp == 0 && c.fp == 0 && c.fn == 0; }

double ratio(std::uint64_t num, std::uint64_t den, const ConfusionCounts& c) noexcept {
  if (den == 0) return perfect_empty(c) ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

void tally(ConfusionCounts& c, int p, int t, std::size_t i) {
  if ((p != 0 && p != 1) || (t != 0 && t != 1)) {
    throw std::invalid_argument("confusion: non-binary value at index " + std::to_string(i));
  }
  if (p && t) {
    ++c.tp;
  } else if (p) {
    ++c.fp;
  } else if (t) {
    ++c.fn;
  } else {
    ++c.tn;
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("confusion: prediction has " + std::to_string(pred.size()) + " pixels, target " +
                     std::to_string(target.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) tally(c, pred[i], target[i], i);
  return c;
}

template <std::floating_point T>
ConfusionCounts confusion(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T p = pred[i], t = target[i];
    const int pi = p == T(1) ? 1 : (p == T(0) ? 0 : -1);
    const int ti = t == T(1) ? 1 : (t == T(0) ? 0 : -1);
    tally(c, pi, ti, i);
  }
  return c;
}

template ConfusionCounts confusion<float>(const BasicTensor<float>&, const BasicTensor<float>&);
template ConfusionCounts confusion<double>(const BasicTensor<double>&, const BasicTensor<double>&);

double precision(const ConfusionCounts& c) noexcept { return ratio(c.tp, c.tp + c.fp, c); }
double recall(const ConfusionCounts& c) noexcept { return ratio(c.tp, c.tp + c.fn, c); }
double iou(const ConfusionCounts& c) noexcept { return ratio(c.tp, c.tp + c.fp + c.fn, c); }

double f1(const ConfusionCounts& c) noexcept {
  if (perfect_empty(c)) return 1.0;
  return f1_from(precision(c), recall(c));
}

double f1_from(double p, double r) noexcept { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

Metrics metrics_of(const ConfusionCounts& c) noexcept { return {f1(c), precision(c), recall(c), iou(c)}; }

Metrics macro_average(std::span<const ConfusionCounts> per_patch) {
  if (per_patch.empty()) throw std::invalid_argument("macro average of zero patches");
  Metrics m;
  for (const auto& c : per_patch) {
    const Metrics x = metrics_of(c);
    m.f1 += x.f1;
    m.precision += x.precision;
    m.recall += x.recall;
    m.iou += x.iou;
  }
  const double n = static_cast<double>(per_patch.size());
  return {m.f1 / n, m.precision / n, m.recall / n, m.iou / n};
}

Metrics micro_average(std::span<const ConfusionCounts> per_patch) noexcept {
  ConfusionCounts pooled;
  for (const auto& c : per_patch) pooled += c;
  return metrics_of(pooled);
}

}  // namespace lseg::metrics
