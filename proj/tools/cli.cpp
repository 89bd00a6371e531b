#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "lseg/data/dataset.hpp"
#include "lseg/data/hdf5_io.hpp"
#include "lseg/data/normalize.hpp"
#include "lseg/data/summary.hpp"
#include "lseg/data/synth.hpp"
#include "lseg/models/checkpoint.hpp"
#include "lseg/service/predictor.hpp"
#include "lseg/service/registry.hpp"
#include "lseg/service/server.hpp"
#include "lseg/train/evaluate.hpp"
#include "lseg/train/trainer.hpp"

namespace lseg::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CliError : std::runtime_error {
  CliError(int exit_code, std::string code, const std::string& message)
      : std::runtime_error(message), exit(exit_code), code(std::move(code)) {}
  int exit;
  std::string code;
};

void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size))) {
    throw CliError(kUnreadablePath, "unwritable_path", path.string() + ": cannot write");
  }
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text.data(), text.size()); }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(kUnreadablePath, "unwritable_path", dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw CliError(kUnreadablePath, "unreadable_path", std::string(what) + " not found: " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

ordered_json metrics_json(const metrics::Metrics& m) {
  ordered_json j;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["iou"] = m.iou;
  return j;
}

data::LoadOptions load_options(const models::ModelSpec& spec, bool any_size, bool require_mask) {
  data::LoadOptions o;
  o.any_size = any_size;
  o.size_multiple = spec.spatial_multiple();
  o.require_mask = require_mask;
  return o;
}

struct TrainArgs {
  std::string config;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  require_file(a.config, "config");
  train::TrainConfig cfg;
  try {
    std::ifstream in(a.config);
    cfg = nlohmann::json::parse(in).get<train::TrainConfig>();
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (cfg.output_dir.empty()) throw std::invalid_argument("output_dir is required");
    if (cfg.manifest.empty()) throw std::invalid_argument("manifest is required");
    cfg.validate();
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kInvalidConfig, "invalid_config", a.config + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(kInvalidConfig, "invalid_config", a.config + ": " + e.what());
  }
  const auto manifest = data::load_manifest(cfg.manifest);
  const auto options = load_options(cfg.model, cfg.any_size, true);
  const auto train_samples = data::load_split(manifest, cfg.train_split, options);
  const auto val_samples = data::load_split(manifest, cfg.val_split, options);
  make_dir(cfg.output_dir);

  const auto result = train::train(cfg, train_samples, val_samples, [&](const train::EpochRecord& r) {
    if (!a.quiet) {
      out << "epoch " << r.epoch << " train_loss " << fmt(r.train_loss) << " val_loss " << fmt(r.val_loss)
          << " val_f1 " << fmt(r.val.f1) << "\n";
    }
    return true;
  });
  out << "best epoch " << result.history.best_epoch << (result.history.stopped_early ? " (early stop)" : "")
      << ", checkpoint " << (cfg.output_dir / "best.lseg").string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, manifest, split = data::kTestSplit, out;
  std::optional<double> threshold;
  std::string averaging = "micro";
  bool any_size = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.manifest, "manifest");
  const auto ckpt = models::load_checkpoint(a.checkpoint);
  const auto manifest = data::load_manifest(a.manifest);
  const auto samples = data::load_split(manifest, a.split, load_options(ckpt.model.spec(), a.any_size, true));
  const auto averaging = metrics::parse_averaging(a.averaging);
  const double threshold = a.threshold.value_or(ckpt.model.spec().threshold);
  const auto ev = train::evaluate(ckpt, samples, threshold, averaging);

  ordered_json report;
  report["split"] = a.split;
  report["patches"] = samples.size();
  report["threshold"] = ev.threshold;
  report["averaging"] = metrics::to_string(ev.averaging);
  report["metrics"] = metrics_json(ev.metrics);
  report["pooled"] = {{"tp", ev.pooled.tp}, {"fp", ev.pooled.fp}, {"fn", ev.pooled.fn}, {"tn", ev.pooled.tn}};
  make_dir(a.out);
  write_text(fs::path(a.out) / "metrics.json", report.dump(2) + "\n");
  write_text(fs::path(a.out) / "per_patch.csv", ev.per_patch_csv());
  out << "f1 " << fmt(ev.metrics.f1) << " precision " << fmt(ev.metrics.precision) << " recall "
      << fmt(ev.metrics.recall) << " iou " << fmt(ev.metrics.iou) << "\n";
  return kOk;
}

struct BenchArgs {
  std::string registry, manifest, split = data::kTestSplit, out;
  double threshold = 0.5;
  std::string averaging = "micro";
  bool any_size = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  require_file(a.registry, "registry");
  require_file(a.manifest, "manifest");
  nlohmann::json reg;
  try {
    std::ifstream in(a.registry);
    reg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kInvalidConfig, "invalid_config", a.registry + ": " + e.what());
  }
  if (!reg.contains("models") || !reg["models"].is_array()) {
    throw CliError(kInvalidConfig, "invalid_config", a.registry + ": expected an object with a \"models\" array");
  }
  std::vector<train::NamedCheckpoint> checkpoints;
  for (const auto& m : reg["models"]) {
    fs::path p = m.at("checkpoint").get<std::string>();
    if (p.is_relative()) p = fs::path(a.registry).parent_path() / p;
    checkpoints.push_back({m.at("id").get<std::string>(), p});
  }
  // Every model is scored on the same samples, so the shape check uses the
  // loosest requirement and each model re-validates its own input.
  data::LoadOptions options;
  options.any_size = a.any_size;
  options.require_mask = true;
  const auto samples = data::load_split(data::load_manifest(a.manifest), a.split, options);
  const auto report = train::benchmark(checkpoints, samples, a.threshold, metrics::parse_averaging(a.averaging));

  make_dir(a.out);
  write_text(fs::path(a.out) / "report.csv", report.to_csv());
  write_text(fs::path(a.out) / "report.md", report.to_markdown());
  write_text(fs::path(a.out) / "report.json", nlohmann::json(report).dump(2) + "\n");
  out << report.to_markdown();
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, input, outdir, model_id;
  std::optional<double> threshold;
  double alpha = 0.5;
  bool any_size = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.input, "input");
  const auto ckpt = models::load_checkpoint(a.checkpoint);
  data::LoadOptions options;
  options.any_size = a.any_size;
  const auto sample = data::load_patch(a.input, {}, options);
  const std::string id = a.model_id.empty() ? fs::path(a.checkpoint).stem().string() : a.model_id;
  const auto p = service::predict(ckpt, sample, id, a.threshold, nullptr, a.alpha);

  const fs::path dir = a.outdir;
  make_dir(dir);
  const auto save_png = [&](const char* name, const service::Image& img) {
    const auto bytes = service::encode_png(img);
    write_file(dir / name, bytes.data(), bytes.size());
  };
  save_png("rgb.png", p.rgb);
  save_png("mask.png", p.mask_image);
  save_png("overlay.png", p.overlay);
  const auto payload = p.probability_payload();
  write_file(dir / "probs.bin", payload.data(), payload.size());
  auto meta = p.sidecar();
  meta["landslide_fraction"] = p.landslide_fraction;
  meta["input"] = fs::path(a.input).filename().string();
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  out << "landslide_fraction " << fmt(p.landslide_fraction) << "\n";
  return kOk;
}

struct SynthArgs {
  std::string out;
  std::size_t n = 8, val_n = 0, test_n = 0, size = 64;
  std::uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  data::SynthLayout layout;
  layout.train = a.n;
  layout.validation = a.val_n;
  layout.test = a.test_n;
  layout.size = a.size;
  layout.seed = a.seed;
  if (a.size == 0 || a.n + a.val_n + a.test_n == 0) {
    throw CliError(kUsage, "usage", "synth needs a positive size and at least one patch");
  }
  make_dir(a.out);
  data::write_synthetic_dataset(a.out, layout);
  out << "wrote " << (a.n + a.val_n + a.test_n) << " synthetic patches to " << a.out << "\n";
  return kOk;
}

struct StatsArgs {
  std::string manifest, out, split = data::kTrainSplit;
  bool any_size = false;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  require_file(a.manifest, "manifest");
  const auto manifest = data::load_manifest(a.manifest);
  for (const auto& w : data::validate_manifest(manifest)) out << "warning: " << w << "\n";
  data::LoadOptions options;
  options.any_size = a.any_size;
  const auto samples = data::load_split(manifest, a.split, options);
  const auto bands = data::summarize_bands(samples);

  std::size_t cleaned = 0;
  double fraction = 0.0;
  for (const auto& s : samples) {
    cleaned += s.cleaned;
    fraction += s.landslide_fraction();
  }
  ordered_json j;
  j["split"] = a.split;
  j["patches"] = samples.size();
  j["mean_landslide_fraction"] = fraction / static_cast<double>(samples.size());
  j["cleaned_values"] = cleaned;
  j["bands"] = data::summary_json(bands);
  const fs::path target = a.out;
  if (target.has_parent_path()) make_dir(target.parent_path());
  write_text(target, j.dump(2) + "\n");
  out << "summarized " << samples.size() << " patches, " << bands.size() << " bands\n";
  return kOk;
}

struct ServeArgs {
  std::string registry, host = "127.0.0.1", static_dir;
  int port = 8080;
  std::size_t max_upload_mb = 64;
  long ttl = 3600;
  bool any_size = false;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.registry, "registry");
  auto registry = std::make_shared<const service::Registry>(service::Registry::load(a.registry));
  for (const auto& le : registry->entries()) {
    if (!le.available()) err << "warning: model '" << le.entry.id << "' rejected: " << le.error << "\n";
  }
  service::ServiceConfig cfg;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.max_upload_bytes = a.max_upload_mb << 20;
  cfg.job_ttl = std::chrono::seconds(a.ttl);
  cfg.static_dir = a.static_dir;
  cfg.any_size = a.any_size;
  service::Server server(registry, cfg);
  const int port = server.bind();
  out << "listening on http://" << a.host << ":" << port << " with " << registry->entries().size() << " models"
      << std::endl;
  server.run();
  return kOk;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int report(std::ostream& err, int exit, const std::string& code, const std::string& message) {
  err << "error: " << code << ": " << one_line(message) << "\n";
  return exit;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Landslide segmentation: training, evaluation and prediction service", "lseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lseg 0.1.0");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", train_args.config, "Training config (JSON)")->required();
  train->add_option("--out", train_args.out, "Override output_dir");
  train->add_flag("--quiet", train_args.quiet, "Suppress per-epoch lines");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--manifest", eval_args.manifest)->required();
  eval->add_option("--split", eval_args.split, "Split name")->capture_default_str();
  eval->add_option("--out", eval_args.out, "Output directory (metrics.json, per_patch.csv)")->required();
  eval->add_option("--threshold", eval_args.threshold, "Defaults to the checkpoint's threshold")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--averaging", eval_args.averaging)->check(CLI::IsMember({"micro", "macro"}))->capture_default_str();
  eval->add_flag("--any-size", eval_args.any_size, "Accept patches other than 128x128");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Score every registry model on one split");
  bench->add_option("--registry", bench_args.registry)->required();
  bench->add_option("--manifest", bench_args.manifest)->required();
  bench->add_option("--split", bench_args.split)->capture_default_str();
  bench->add_option("--out", bench_args.out, "Output directory (report.csv, report.md, report.json)")->required();
  bench->add_option("--threshold", bench_args.threshold)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bench->add_option("--averaging", bench_args.averaging)->check(CLI::IsMember({"micro", "macro"}))->capture_default_str();
  bench->add_flag("--any-size", bench_args.any_size);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Predict one patch");
  predict->add_option("--checkpoint", predict_args.checkpoint)->required();
  predict->add_option("--input", predict_args.input, "HDF5 patch")->required();
  predict->add_option("--outdir", predict_args.outdir)->required();
  predict->add_option("--threshold", predict_args.threshold)->check(CLI::Range(0.0, 1.0));
  predict->add_option("--model-id", predict_args.model_id, "Model id in meta.json (default: checkpoint stem)");
  predict->add_option("--alpha", predict_args.alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  predict->add_flag("--any-size", predict_args.any_size);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with a manifest");
  synth->add_option("--out", synth_args.out)->required();
  synth->add_option("--n", synth_args.n, "Training patches")->capture_default_str();
  synth->add_option("--val-n", synth_args.val_n, "Validation patches")->capture_default_str();
  synth->add_option("--test-n", synth_args.test_n, "Test patches")->capture_default_str();
  synth->add_option("--size", synth_args.size, "Patch edge length")->capture_default_str();
  synth->add_option("--seed", synth_args.seed)->capture_default_str();

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Per-band statistics of a split");
  stats->add_option("--manifest", stats_args.manifest)->required();
  stats->add_option("--out", stats_args.out, "Output JSON file")->required();
  stats->add_option("--split", stats_args.split)->capture_default_str();
  stats->add_flag("--any-size", stats_args.any_size);

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the HTTP prediction service");
  serve->add_option("--registry", serve_args.registry)->envname("LSEG_REGISTRY")->required();
  serve->add_option("--port", serve_args.port)->envname("LSEG_PORT")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--host", serve_args.host)->capture_default_str();
  serve->add_option("--max-upload-mb", serve_args.max_upload_mb)->capture_default_str();
  serve->add_option("--ttl", serve_args.ttl, "Export retention in seconds")->check(CLI::PositiveNumber)->capture_default_str();
  serve->add_option("--static", serve_args.static_dir, "Directory served at /");
  serve->add_flag("--any-size", serve_args.any_size);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kUsage, "usage", e.what());
  }

  try {
    if (*train) return cmd_train(train_args, out);
    if (*eval) return cmd_eval(eval_args, out);
    if (*bench) return cmd_bench(bench_args, out);
    if (*predict) return cmd_predict(predict_args, out);
    if (*synth) return cmd_synth(synth_args, out);
    if (*stats) return cmd_stats(stats_args, out);
    if (*serve) return cmd_serve(serve_args, out, err);
  } catch (const CliError& e) {
    return report(err, e.exit, e.code, e.what());
  } catch (const data::DataError& e) {
    if (e.kind() == data::DataError::Kind::kUnreadable) return report(err, kUnreadablePath, "unreadable_path", e.what());
    return report(err, kDataError, std::string("data.") + data::to_string(e.kind()), e.what());
  } catch (const models::CheckpointError& e) {
    if (e.kind() == models::CheckpointError::Kind::kIo) return report(err, kUnreadablePath, "unreadable_path", e.what());
    return report(err, kCheckpointError, std::string("checkpoint.") + models::to_string(e.kind()), e.what());
  } catch (const train::TrainError& e) {
    return report(err, kFailure, "training_failed", e.what());
  } catch (const nlohmann::json::exception& e) {
    return report(err, kInvalidConfig, "invalid_config", e.what());
  } catch (const std::invalid_argument& e) {
    return report(err, kInvalidConfig, "invalid_config", e.what());
  } catch (const std::exception& e) {
    return report(err, kFailure, "failed", e.what());
  }
  return kUsage;
}

}  // namespace lseg::cli
