#include "lseg/train/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace lseg::train {

std::string Evaluation::per_patch_csv() const {
  std::string out = "id,tp,fp,fn,tn,f1,precision,recall,iou\n";
  char buf[160];
  for (const auto& p : per_patch) {
    std::snprintf(buf, sizeof buf, ",%llu,%llu,%llu,%llu,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<unsigned long long>(p.counts.tp), static_cast<unsigned long long>(p.counts.fp),
                  static_cast<unsigned long long>(p.counts.fn), static_cast<unsigned long long>(p.counts.tn),
                  p.metrics.f1, p.metrics.precision, p.metrics.recall, p.metrics.iou);
    out += p.id + buf;
  }
  return out;
}

Evaluation evaluate_examples(const models::Model<float>& model, std::span<const data::Example> examples,
                             double threshold, metrics::Averaging averaging) {
  if (examples.empty()) throw data::DataError(data::DataError::Kind::kEmptySplit, "cannot evaluate an empty split");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return examples[a].id < examples[b].id; });

  Evaluation ev;
  ev.averaging = averaging;
  ev.threshold = threshold;
  std::vector<metrics::ConfusionCounts> counts;
  for (std::size_t idx : order) {
    const auto& ex = examples[idx];
    if (ex.mask.empty()) {
      throw data::DataError(data::DataError::Kind::kMissingKey, "patch '" + ex.id + "' has no mask to evaluate against");
    }
    const Tensor x = ex.input.reshaped({1, ex.input.dim(0), ex.input.dim(1), ex.input.dim(2)});
    const auto pred = models::predict_mask_bytes(model.forward(x), threshold);
    const auto c = metrics::confusion(pred, ex.mask);
    counts.push_back(c);
    ev.per_patch.push_back({ex.id, c, metrics::metrics_of(c)});
    ev.pooled += c;
  }
  ev.metrics = averaging == metrics::Averaging::kMacro ? metrics::macro_average(counts) : metrics::metrics_of(ev.pooled);
  return ev;
}

Evaluation evaluate(const models::Checkpoint& checkpoint, std::span<const data::PatchSample> samples, double threshold,
                    metrics::Averaging averaging) {
  const auto examples = data::prepare_examples(samples, checkpoint.channels, checkpoint.band_stats, true);
  return evaluate_examples(checkpoint.model, examples, threshold, averaging);
}

metrics::MetricsReport benchmark(std::span<const NamedCheckpoint> checkpoints,
                                 std::span<const data::PatchSample> samples, double threshold,
                                 metrics::Averaging averaging) {
  if (checkpoints.empty()) throw std::invalid_argument("benchmark needs at least one checkpoint");
  std::vector<metrics::ReportEntry> entries;
  for (const auto& c : checkpoints) {
    const auto ck = models::load_checkpoint(c.path);
    entries.push_back({c.name, evaluate(ck, samples, threshold, averaging).metrics});
  }
  return metrics::benchmark_report(entries, averaging);
}

}  // namespace lseg::train
