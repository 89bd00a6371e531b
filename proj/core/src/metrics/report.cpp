#include "lseg/metrics/report.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

namespace lseg::metrics {

const char* to_string(Averaging mode) noexcept { return mode == Averaging::kMacro ? "macro" : "micro"; }

Averaging parse_averaging(const std::string& name) {
  if (name == "micro") return Averaging::kMicro;
  if (name == "macro") return Averaging::kMacro;
  throw std::invalid_argument("unknown averaging '" + name + "' (expected micro or macro)");
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::string out = "model,f1,precision,recall,iou\n";
  for (const auto& r : rows) {
    out += r.model + ',' + fixed4(r.metrics.f1) + ',' + fixed4(r.metrics.precision) + ',' +
           fixed4(r.metrics.recall) + ',' + fixed4(r.metrics.iou) + '\n';
  }
  return out;
}

std::string MetricsReport::to_markdown() const {
  std::string out = "| Model | F1 | Precision | Recall | IoU |\n|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out += "| " + r.model + " | " + fixed4(r.metrics.f1) + " | " + fixed4(r.metrics.precision) + " | " +
           fixed4(r.metrics.recall) + " | " + fixed4(r.metrics.iou) + " |\n";
  }
  return out;
}

void to_json(nlohmann::json& j, const MetricsReport& report) {
  j = nlohmann::json{{"averaging", to_string(report.averaging)}, {"rows", nlohmann::json::array()}};
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"model", r.model},
                         {"f1", r.metrics.f1},
                         {"precision", r.metrics.precision},
                         {"recall", r.metrics.recall},
                         {"iou", r.metrics.iou}});
  }
}

MetricsReport benchmark_report(std::span<const ReportEntry> entries, Averaging averaging) {
  if (entries.empty()) throw std::invalid_argument("benchmark report needs at least one entry");
  std::set<std::string> seen;
  MetricsReport report;
  report.averaging = averaging;
  for (const auto& e : entries) {
    if (!seen.insert(e.model).second) throw std::invalid_argument("duplicate model name '" + e.model + "' in report");
    const Metrics m = std::holds_alternative<Metrics>(e.value) ? std::get<Metrics>(e.value)
                                                               : metrics_of(std::get<ConfusionCounts>(e.value));
    report.rows.push_back({e.model, m});
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
    return a.model < b.model;
  });
  return report;
}

Metrics metrics_from_precision_recall(double precision, double recall) noexcept {
  const double f = f1_from(precision, recall);
  return {f, precision, recall, f / (2.0 - f)};
}

}  // namespace lseg::metrics
