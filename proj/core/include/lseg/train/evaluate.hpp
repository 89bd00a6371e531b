#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lseg/data/dataset.hpp"
#include "lseg/metrics/report.hpp"
#include "lseg/models/checkpoint.hpp"

namespace lseg::train {

struct PatchEvaluation {
  std::string id;
  metrics::ConfusionCounts counts;
  metrics::Metrics metrics;
};

struct Evaluation {
  metrics::Averaging averaging = metrics::Averaging::kMicro;
  double threshold = 0.5;
  metrics::Metrics metrics;
  metrics::ConfusionCounts pooled;
  std::vector<PatchEvaluation> per_patch;

  /// `id,tp,fp,fn,tn,f1,precision,recall,iou`, one row per patch in id order.
  std::string per_patch_csv() const;
};

/// Eval-mode forward over prepared examples, one patch at a time in id
/// order, thresholded with `>=`.
Evaluation evaluate_examples(const models::Model<float>& model, std::span<const data::Example> examples,
                             double threshold, metrics::Averaging averaging);

/// Applies the checkpoint's channel config and band statistics, then
/// evaluates. Samples must carry masks.
Evaluation evaluate(const models::Checkpoint& checkpoint, std::span<const data::PatchSample> samples,
                    double threshold, metrics::Averaging averaging = metrics::Averaging::kMicro);

struct NamedCheckpoint {
  std::string name;
  std::filesystem::path path;
};

/// Evaluates every checkpoint on the same samples and ranks them.
metrics::MetricsReport benchmark(std::span<const NamedCheckpoint> checkpoints,
                                 std::span<const data::PatchSample> samples, double threshold,
                                 metrics::Averaging averaging = metrics::Averaging::kMicro);

}  // namespace lseg::train
