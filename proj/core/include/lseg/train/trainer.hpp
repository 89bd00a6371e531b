#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lseg/data/dataset.hpp"
#include "lseg/metrics/losses.hpp"
#include "lseg/metrics/report.hpp"
#include "lseg/models/checkpoint.hpp"
#include "lseg/train/adam.hpp"

namespace lseg::train {

struct TrainConfig {
  models::ModelSpec model;
  metrics::LossConfig loss;
  data::ChannelConfig channels = data::ChannelConfig::six_channel();
  AdamConfig adam;

  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  /// Stop after this many consecutive epochs without a strictly higher
  /// validation F1.
  std::size_t patience = 10;
  std::uint64_t seed = 42;
  bool augment = false;
  /// Validation threshold.
  double threshold = 0.5;

  /// Step decay: lr *= lr_decay_factor every lr_decay_every epochs. 0 = off.
  std::size_t lr_decay_every = 0;
  double lr_decay_factor = 0.5;

  /// Where best.lseg, history.csv and history.json go. Empty = keep in memory.
  std::filesystem::path output_dir;

  // Data source, used by the command-line front end.
  std::filesystem::path manifest;
  std::string train_split = data::kTrainSplit;
  std::string val_split = data::kValidationSplit;
  bool any_size = false;

  /// Throws std::invalid_argument naming the first invalid field.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Missing keys keep their defaults. Relative paths are kept as written.
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  metrics::Metrics val;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  /// `epoch,train_loss,val_loss,val_precision,val_recall,val_f1,val_iou`.
  /// Excludes wall-clock time so equal runs give equal bytes.
  std::string to_csv() const;
};

void to_json(nlohmann::json& j, const TrainHistory& history);

/// Patience rule on a monitored score where higher is better. An epoch
/// improves only when its score is strictly above every earlier one.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  /// Records one epoch's score; returns true when it is a new best.
  bool observe(double score);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  TrainHistory history;
  data::BandStats band_stats;
  /// Serialized checkpoint of the best epoch.
  std::vector<std::byte> best_checkpoint;
};

/// Called after every epoch; return false to stop.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Fits band statistics on the training split, then runs Adam with
/// shuffled batches. After every epoch the model is evaluated on the
/// validation split; a new best validation F1 replaces the kept checkpoint
/// (and best.lseg when output_dir is set). Throws TrainError on a non-finite
/// loss, naming the epoch and batch.
TrainResult train(const TrainConfig& config, std::span<const data::PatchSample> train_samples,
                  std::span<const data::PatchSample> val_samples, const EpochCallback& on_epoch = {});

/// Mean loss of the model on one batch, without updating anything.
double batch_loss(const models::Model<float>& model, const data::Batch& batch, const metrics::LossConfig& loss);

}  // namespace lseg::train
