#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "wetseg/image.hpp"
#include "wetseg/metrics.hpp"

namespace wetseg {

/// Mapping from each model class to {0=land, 1=water}, with the dataset-wide
/// IOU of every (model class, ground-truth class) pair that produced it.
struct ClassAssignment {
  std::vector<std::uint8_t> mapping;                 // per model class
  std::vector<std::array<double, 2>> per_class_iou;  // [vs land, vs water]

  int num_classes() const { return static_cast<int>(mapping.size()); }
};

/// Assigns every model class to the ground-truth class it overlaps most,
/// measured with a single dataset-global IOU per pair (counts aggregated over
/// all pixels of all masks). Ties and never-predicted classes go to land.
inline ClassAssignment fit_assignment(const std::vector<MaskImage>& model_masks,
                                      const std::vector<MaskImage>& gt_masks,
                                      int num_classes, double epsilon = kIouEpsilon) {
  require(!model_masks.empty(), "fit_assignment: empty input");
  require(model_masks.size() == gt_masks.size(), "fit_assignment: count mismatch");
  require(num_classes >= 1, "fit_assignment: need at least one model class");

  // inter[k][g], union[k][g] for g in {land, water}
  std::vector<std::array<long long, 2>> inter(num_classes, {0, 0});
  std::vector<std::array<long long, 2>> uni(num_classes, {0, 0});
  std::vector<long long> class_count(num_classes, 0);
  long long gt_count[2] = {0, 0};

  for (std::size_t t = 0; t < model_masks.size(); ++t) {
    require(model_masks[t].same_shape(gt_masks[t]), "fit_assignment: shape mismatch");
    const auto& pred = model_masks[t].raw();
    const auto& gt = gt_masks[t].raw();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      require(pred[i] < num_classes, "fit_assignment: class id out of range");
      require(gt[i] <= 1, "fit_assignment: ground truth must be binary");
      ++class_count[pred[i]];
      ++gt_count[gt[i]];
      ++inter[pred[i]][gt[i]];
    }
  }

  ClassAssignment out;
  out.mapping.resize(num_classes);
  out.per_class_iou.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    for (int g = 0; g < 2; ++g) {
      const long long u = class_count[k] + gt_count[g] - inter[k][g];
      uni[k][g] = u;
      out.per_class_iou[k][g] =
          (static_cast<double>(inter[k][g]) + epsilon) / (static_cast<double>(u) + epsilon);
    }
    out.mapping[k] = out.per_class_iou[k][1] > out.per_class_iou[k][0] ? 1 : 0;
  }
  return out;
}

inline MaskImage apply_assignment(const MaskImage& model_mask,
                                  const ClassAssignment& assignment) {
  MaskImage out(model_mask.rows(), model_mask.cols());
  for (std::size_t i = 0; i < model_mask.raw().size(); ++i) {
    const std::uint8_t cls = model_mask.raw()[i];
    require(cls < assignment.mapping.size(), "apply_assignment: class id out of range");
    out.raw()[i] = assignment.mapping[cls];
  }
  return out;
}

/// Per-pixel ensemble combination: water wins only with a strict majority;
/// exact ties (even member counts) resolve to land.
inline MaskImage majority_vote(const std::vector<MaskImage>& masks) {
  require(!masks.empty(), "majority_vote: empty member list");
  const int m = static_cast<int>(masks.size());
  MaskImage out(masks.front().rows(), masks.front().cols());
  for (const auto& mask : masks) {
    require(mask.same_shape(out), "majority_vote: shape mismatch");
    require(is_binary(mask), "majority_vote: non-binary member mask");
  }
  for (std::size_t i = 0; i < out.raw().size(); ++i) {
    int votes = 0;
    for (const auto& mask : masks) votes += mask.raw()[i];
    out.raw()[i] = 2 * votes > m ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assignment persistence: a small text record next to the checkpoint.
// ---------------------------------------------------------------------------

inline void save_assignment(const std::string& path, const ClassAssignment& assignment,
                            const std::string& checkpoint_id,
                            const std::string& fitting_dataset) {
  std::ofstream f(path);
  if (!f) fail("save_assignment: cannot write " + path);
  f << "# wetseg class assignment v1\n";
  f << "checkpoint\t" << checkpoint_id << "\n";
  f << "fitted_on\t" << fitting_dataset << "\n";
  f << "classes\t" << assignment.num_classes() << "\n";
  f.precision(12);
  for (int k = 0; k < assignment.num_classes(); ++k)
    f << k << '\t' << (assignment.mapping[k] ? "water" : "land") << '\t'
      << assignment.per_class_iou[k][0] << '\t' << assignment.per_class_iou[k][1] << '\n';
}

inline ClassAssignment load_assignment(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("load_assignment: cannot read " + path);
  std::string line;
  std::getline(f, line);  // banner
  ClassAssignment out;
  int n = 0;
  while (std::getline(f, line)) {
    if (line.rfind("classes\t", 0) == 0) {
      n = std::stoi(line.substr(8));
      break;
    }
  }
  require(n > 0, "load_assignment: malformed file");
  out.mapping.resize(n);
  out.per_class_iou.resize(n);
  for (int k = 0; k < n; ++k) {
    int idx;
    std::string cls;
    double il, iw;
    f >> idx >> cls >> il >> iw;
    require(f.good() && idx == k, "load_assignment: malformed class row");
    out.mapping[k] = cls == "water" ? 1 : 0;
    out.per_class_iou[k] = {il, iw};
  }
  return out;
}

}  // namespace wetseg
