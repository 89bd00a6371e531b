#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lseg/metrics/confusion.hpp"

namespace lseg::metrics {

enum class Averaging { kMicro, kMacro };

const char* to_string(Averaging mode) noexcept;
Averaging parse_averaging(const std::string& name);

struct ReportRow {
  std::string model;
  Metrics metrics;
};

/// Model comparison table, sorted by F1 descending then name ascending.
struct MetricsReport {
  std::vector<ReportRow> rows;
  Averaging averaging = Averaging::kMicro;

  /// Header `model,f1,precision,recall,iou`, four decimals, LF endings.
  std::string to_csv() const;
  std::string to_markdown() const;
};

void to_json(nlohmann::json& j, const MetricsReport& report);

struct ReportEntry {
  std::string model;
  std::variant<ConfusionCounts, Metrics> value;
};

/// Throws std::invalid_argument on an empty list or a repeated model name.
MetricsReport benchmark_report(std::span<const ReportEntry> entries, Averaging averaging = Averaging::kMicro);

/// Row for a model known only by precision and recall. F1 is their harmonic
/// mean and IoU follows from F1 / (2 - F1).
Metrics metrics_from_precision_recall(double precision, double recall) noexcept;

}  // namespace lseg::metrics
