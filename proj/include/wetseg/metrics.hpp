#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "wetseg/image.hpp"

namespace wetseg {

constexpr double kIouEpsilon = 1e-6;

/// Intersection over union of the water areas of two binary masks, with a
/// small additive guard so that empty-vs-empty scores 1.
inline double iou(const MaskImage& pred, const MaskImage& gt, double epsilon = kIouEpsilon) {
  require(pred.same_shape(gt), "iou: shape mismatch");
  require(is_binary(pred) && is_binary(gt), "iou: non-binary input");
  long long inter = 0, uni = 0;
  const auto& a = pred.raw();
  const auto& b = gt.raw();
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  return (static_cast<double>(inter) + epsilon) / (static_cast<double>(uni) + epsilon);
}

/// IOU pooled over all pixels of a batch of masks.
inline double iou_batch(std::span<const MaskImage> preds, std::span<const MaskImage> gts,
                        double epsilon = kIouEpsilon) {
  require(preds.size() == gts.size() && !preds.empty(), "iou_batch: mismatched batch");
  long long inter = 0, uni = 0;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    require(preds[t].same_shape(gts[t]), "iou_batch: shape mismatch");
    require(is_binary(preds[t]) && is_binary(gts[t]), "iou_batch: non-binary input");
    const auto& a = preds[t].raw();
    const auto& b = gts[t].raw();
    for (std::size_t i = 0; i < a.size(); ++i) {
      inter += a[i] & b[i];
      uni += a[i] | b[i];
    }
  }
  return (static_cast<double>(inter) + epsilon) / (static_cast<double>(uni) + epsilon);
}

struct EvalReport {
  std::vector<double> per_batch_iou;
  double dataset_iou = 0;  // mean of the batch IOUs
  double global_iou = 0;   // single IOU over all pixels, for reference
  int n_batches = 0;
  double epsilon = kIouEpsilon;
};

/// Groups tiles into consecutive batches (dataset order, last partial batch
/// kept), scores one IOU per batch and reports the mean as the dataset IOU.
inline EvalReport evaluate_dataset(const std::vector<MaskImage>& preds,
                                   const std::vector<MaskImage>& gts, int batch_size,
                                   double epsilon = kIouEpsilon) {
  require(!preds.empty(), "evaluate_dataset: empty dataset");
  require(preds.size() == gts.size(), "evaluate_dataset: count mismatch");
  require(batch_size >= 1, "evaluate_dataset: batch_size must be >= 1");
  EvalReport report;
  report.epsilon = epsilon;
  for (std::size_t start = 0; start < preds.size(); start += batch_size) {
    const std::size_t len = std::min<std::size_t>(batch_size, preds.size() - start);
    report.per_batch_iou.push_back(
        iou_batch(std::span(preds).subspan(start, len), std::span(gts).subspan(start, len),
                  epsilon));
  }
  report.n_batches = static_cast<int>(report.per_batch_iou.size());
  report.dataset_iou =
      std::accumulate(report.per_batch_iou.begin(), report.per_batch_iou.end(), 0.0) /
      report.n_batches;
  report.global_iou = iou_batch(std::span(preds), std::span(gts), epsilon);
  return report;
}

struct RunStats {
  double mean = 0;
  double variance = 0;  // population variance (n divisor)
};

inline RunStats aggregate_runs(const std::vector<double>& values) {
  require(!values.empty(), "aggregate_runs: empty value list");
  RunStats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  for (double v : values) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= values.size();
  return s;
}

}  // namespace wetseg
