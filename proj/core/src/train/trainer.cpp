#include "lseg/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "lseg/train/evaluate.hpp"

namespace lseg::train {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  channels.validate();
  adam.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
  if (lr_decay_every > 0 && !(lr_decay_factor > 0.0)) throw std::invalid_argument("lr_decay_factor must be positive");
  if (model.in_channels != channels.channel_count()) {
    throw std::invalid_argument("model.in_channels is " + std::to_string(model.in_channels) +
                                " but the channel config selects " + std::to_string(channels.channel_count()));
  }
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"model", cfg.model},
                     {"loss", cfg.loss},
                     {"channels", cfg.channels},
                     {"lr", cfg.adam.lr},
                     {"beta1", cfg.adam.beta1},
                     {"beta2", cfg.adam.beta2},
                     {"adam_eps", cfg.adam.eps},
                     {"batch_size", cfg.batch_size},
                     {"max_epochs", cfg.max_epochs},
                     {"patience", cfg.patience},
                     {"seed", cfg.seed},
                     {"augment", cfg.augment},
                     {"threshold", cfg.threshold},
                     {"lr_decay_every", cfg.lr_decay_every},
                     {"lr_decay_factor", cfg.lr_decay_factor},
                     {"output_dir", cfg.output_dir.generic_string()},
                     {"manifest", cfg.manifest.generic_string()},
                     {"train_split", cfg.train_split},
                     {"val_split", cfg.val_split},
                     {"any_size", cfg.any_size}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  const TrainConfig d;
  cfg = d;
  if (j.contains("channels")) cfg.channels = j["channels"].get<data::ChannelConfig>();
  if (j.contains("model")) {
    cfg.model = j["model"].get<models::ModelSpec>();
    if (!j["model"].contains("in_channels")) cfg.model.in_channels = cfg.channels.channel_count();
  } else {
    cfg.model.in_channels = cfg.channels.channel_count();
  }
  if (j.contains("loss")) cfg.loss = j["loss"].get<metrics::LossConfig>();
  cfg.adam.lr = j.value("lr", d.adam.lr);
  cfg.adam.beta1 = j.value("beta1", d.adam.beta1);
  cfg.adam.beta2 = j.value("beta2", d.adam.beta2);
  cfg.adam.eps = j.value("adam_eps", d.adam.eps);
  cfg.batch_size = j.value("batch_size", d.batch_size);
  cfg.max_epochs = j.value("max_epochs", d.max_epochs);
  cfg.patience = j.value("patience", d.patience);
  cfg.seed = j.value("seed", d.seed);
  cfg.augment = j.value("augment", d.augment);
  cfg.threshold = j.value("threshold", d.threshold);
  cfg.lr_decay_every = j.value("lr_decay_every", d.lr_decay_every);
  cfg.lr_decay_factor = j.value("lr_decay_factor", d.lr_decay_factor);
  cfg.output_dir = j.value("output_dir", std::string());
  cfg.manifest = j.value("manifest", std::string());
  cfg.train_split = j.value("train_split", d.train_split);
  cfg.val_split = j.value("val_split", d.val_split);
  cfg.any_size = j.value("any_size", d.any_size);
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,val_precision,val_recall,val_f1,val_iou\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8f,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss, e.val_loss,
                  e.val.precision, e.val.recall, e.val.f1, e.val.iou);
    out += buf;
  }
  return out;
}

void to_json(nlohmann::json& j, const TrainHistory& history) {
  j = nlohmann::json{{"best_epoch", history.best_epoch},
                     {"stopped_early", history.stopped_early},
                     {"epochs", nlohmann::json::array()}};
  for (const auto& e : history.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"val_precision", e.val.precision},
                           {"val_recall", e.val.recall},
                           {"val_f1", e.val.f1},
                           {"val_iou", e.val.iou},
                           {"seconds", e.seconds}});
  }
}

double batch_loss(const models::Model<float>& model, const data::Batch& batch, const metrics::LossConfig& loss) {
  return metrics::compute_loss(model.forward(batch.images), batch.masks, loss).value;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TrainError("cannot write " + path.string());
  out << text;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TrainError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

double validation_loss(const models::Model<float>& model, std::span<const data::Example> examples,
                       const metrics::LossConfig& loss) {
  double total = 0.0;
  for (const auto& ex : examples) {
    const std::size_t c = ex.input.dim(0), h = ex.input.dim(1), w = ex.input.dim(2);
    const Tensor probs = model.forward(ex.input.reshaped({1, c, h, w}));
    const Tensor target({1, 1, h, w}, std::vector<float>(ex.mask.begin(), ex.mask.end()));
    total += metrics::compute_loss(probs, target, loss).value;
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace

bool EarlyStopping::observe(double score) {
  if (score > best_) {
    best_ = score;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainResult train(const TrainConfig& config, std::span<const data::PatchSample> train_samples,
                  std::span<const data::PatchSample> val_samples, const EpochCallback& on_epoch) {
  config.validate();
  if (train_samples.empty()) throw data::DataError(data::DataError::Kind::kEmptySplit, "training split is empty");
  if (val_samples.empty()) throw data::DataError(data::DataError::Kind::kEmptySplit, "validation split is empty");

  TrainResult result;
  result.band_stats = data::fit_band_stats(train_samples, config.channels);
  const auto train_ex = data::prepare_examples(train_samples, config.channels, result.band_stats, true);
  const auto val_ex = data::prepare_examples(val_samples, config.channels, result.band_stats, true);

  Rng root(config.seed);
  Rng init_rng = root.split();
  Rng order_rng = root.split();
  Rng augment_rng = root.split();

  auto model = models::build_model<float>(config.model, init_rng);
  Adam<float> adam(config.adam);
  const auto params = model.parameters();

  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

  EarlyStopping stopper(config.patience);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (config.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % config.lr_decay_every == 0) {
      adam.config().lr *= config.lr_decay_factor;
    }

    model.set_training(true);
    data::BatchIterator batches(train_ex, config.batch_size, true, order_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; !batches.done(); ++b) {
      const auto indices = batches.next_indices();
      std::vector<data::Augmentation> ops;
      if (config.augment) {
        for (std::size_t k = 0; k < indices.size(); ++k) ops.push_back(data::random_augmentation(augment_rng));
      }
      const auto batch = data::make_batch(train_ex, indices, ops);
      model.zero_grad();
      const Tensor probs = model.forward_train(batch.images);
      const auto loss = metrics::compute_loss(probs, batch.masks, config.loss);
      if (!std::isfinite(loss.value) || !loss.grad.all_finite()) {
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1));
      }
      model.backward(loss.grad);
      adam.step(params);
      loss_sum += loss.value * static_cast<double>(indices.size());
      seen += indices.size();
    }
    model.set_training(false);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = validation_loss(model, val_ex, config.loss);
    rec.val = evaluate_examples(model, val_ex, config.threshold, metrics::Averaging::kMicro).metrics;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(rec);

    if (stopper.observe(rec.val.f1)) {
      result.history.best_epoch = epoch;
      const nlohmann::json meta{{"epoch", epoch}, {"val_f1", rec.val.f1}, {"seed", config.seed}};
      result.best_checkpoint = models::save_checkpoint_bytes(model, config.channels, result.band_stats, meta);
      if (!config.output_dir.empty()) write_bytes(config.output_dir / "best.lseg", result.best_checkpoint);
    }

    if (!config.output_dir.empty()) {
      write_text(config.output_dir / "history.csv", result.history.to_csv());
      write_text(config.output_dir / "history.json", nlohmann::json(result.history).dump(2) + "\n");
    }
    if (on_epoch && !on_epoch(rec)) break;
    if (stopper.should_stop()) {
      result.history.stopped_early = true;
      break;
    }
  }
  if (!config.output_dir.empty()) {
    write_text(config.output_dir / "history.json", nlohmann::json(result.history).dump(2) + "\n");
  }
  return result;
}

}  // namespace lseg::train
