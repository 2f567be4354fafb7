#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wetseg/metrics.hpp"
#include "wetseg/plot.hpp"

namespace wetseg {

/// One parsed metrics log (the line-delimited records a training run emits).
struct RunLog {
  std::string name;
  std::vector<double> step_loss;          // loss_total (or loss_dice) per step
  std::vector<double> step_lr;
  std::vector<int> step_distinct;         // distinct pseudo-label classes per step
  std::vector<int> step_epoch;
  std::vector<double> epoch_val_iou;      // NaN where validation was unlabeled
};

inline RunLog parse_metrics_log(const std::string& path, const std::string& name) {
  std::ifstream f(path);
  if (!f) fail("report: cannot read metrics log " + path);
  RunLog log;
  log.name = name;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string kind = j.value("kind", "");
    if (kind == "step") {
      if (j.contains("loss_total"))
        log.step_loss.push_back(j["loss_total"].get<double>());
      else
        log.step_loss.push_back(j.value("loss_dice", 0.0));
      log.step_lr.push_back(j.value("lr", 0.0));
      log.step_distinct.push_back(j.value("distinct_classes", 0));
      log.step_epoch.push_back(j.value("epoch", 0));
    } else if (kind == "epoch") {
      log.epoch_val_iou.push_back(j["val_iou"].is_null()
                                      ? std::numeric_limits<double>::quiet_NaN()
                                      : j["val_iou"].get<double>());
    }
  }
  if (log.step_loss.empty() && log.epoch_val_iou.empty())
    fail("report: metrics log is empty or malformed: " + path);
  return log;
}

/// Mean distinct pseudo-label classes per batch over one epoch of a run.
inline std::vector<double> distinct_classes_per_epoch(const RunLog& log) {
  std::vector<double> sums, counts;
  for (std::size_t i = 0; i < log.step_distinct.size(); ++i) {
    const int e = log.step_epoch[i];
    if (static_cast<std::size_t>(e) >= sums.size()) {
      sums.resize(e + 1, 0.0);
      counts.resize(e + 1, 0.0);
    }
    sums[e] += log.step_distinct[i];
    counts[e] += 1.0;
  }
  std::vector<double> out(sums.size());
  for (std::size_t e = 0; e < sums.size(); ++e)
    out[e] = counts[e] > 0 ? sums[e] / counts[e] : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Figures: one series per run.
// ---------------------------------------------------------------------------

inline void render_val_iou_curves(const std::vector<RunLog>& runs, const std::string& path) {
  std::vector<Series> series;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    Series s;
    s.color = series_palette()[r % series_palette().size()];
    for (std::size_t e = 0; e < runs[r].epoch_val_iou.size(); ++e) {
      s.x.push_back(static_cast<double>(e));
      s.y.push_back(runs[r].epoch_val_iou[e]);
    }
    series.push_back(std::move(s));
  }
  render_line_chart(path, series);
}

inline void render_loss_curves(const std::vector<RunLog>& runs, const std::string& path) {
  std::vector<Series> series;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    Series s;
    s.color = series_palette()[r % series_palette().size()];
    for (std::size_t i = 0; i < runs[r].step_loss.size(); ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(runs[r].step_loss[i]);
    }
    series.push_back(std::move(s));
  }
  render_line_chart(path, series);
}

inline void render_class_occupancy_curves(const std::vector<RunLog>& runs,
                                          const std::string& path) {
  std::vector<Series> series;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    Series s;
    s.color = series_palette()[r % series_palette().size()];
    const auto per_epoch = distinct_classes_per_epoch(runs[r]);
    for (std::size_t e = 0; e < per_epoch.size(); ++e) {
      s.x.push_back(static_cast<double>(e));
      s.y.push_back(per_epoch[e]);
    }
    series.push_back(std::move(s));
  }
  render_line_chart(path, series);
}

// ---------------------------------------------------------------------------
// Text tables in the "model | mean +/- var" shape.
// ---------------------------------------------------------------------------

struct TableRow {
  std::string label;
  std::vector<double> values;  // IOUs over repeated runs
};

inline std::string render_mean_var_table(const std::string& title,
                                         const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << title << '\n';
  os << std::string(title.size(), '-') << '\n';
  std::size_t width = 12;
  for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
  os << std::left << std::setw(static_cast<int>(width)) << "variant"
     << "test IOU mean+-var (runs)\n";
  for (const auto& r : rows) {
    const auto stats = aggregate_runs(r.values);
    os << std::left << std::setw(static_cast<int>(width)) << r.label << std::fixed
       << std::setprecision(3) << stats.mean << " +- " << std::scientific
       << std::setprecision(1) << stats.variance << "  (" << r.values.size() << ")\n";
  }
  return os.str();
}

}  // namespace wetseg
