#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "wetseg/nn/tensor.hpp"

namespace wetseg {

struct LossWeights {
  double clustering = 0.1;       // weight on both deep-clustering terms
  double positive = 1.0;         // weight on the positive-pair term
  double negative = 1.0;         // weight on the negative-pair term
  double class_smoothing = 1.0;  // smoothing constant in the class-weight formula
  bool weighted_clustering = true;

  void validate() const {
    require(clustering >= 0 && positive >= 0 && negative >= 0,
            "LossWeights: negative loss weight");
    require(class_smoothing > 0, "LossWeights: class_smoothing must be > 0");
  }
};

struct LossReport {
  double clustering = 0;      // standard branch
  double clustering_aug = 0;  // augmented branch
  double positive = 0;
  double negative = 0;
  double total = 0;
  std::vector<long long> class_histogram;  // standard-branch pseudo-labels

  int distinct_classes() const {
    int n = 0;
    for (auto k : class_histogram)
      if (k > 0) ++n;
    return n;
  }
};

/// Per-pixel argmax class, shaped like one channel plane of the batch.
struct LabelBatch {
  int n = 0, h = 0, w = 0;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

template <typename T>
LabelBatch pseudo_labels(const nn::Tensor4<T>& probs) {
  LabelBatch out;
  out.n = probs.n;
  out.h = probs.h;
  out.w = probs.w;
  out.labels.resize(static_cast<std::size_t>(probs.n) * probs.h * probs.w);
  const std::size_t hw = probs.plane();
  std::size_t o = 0;
  for (int in = 0; in < probs.n; ++in) {
    const T* s = probs.sample(in);
    for (std::size_t i = 0; i < hw; ++i, ++o) {
      int best = 0;
      T bv = s[i];
      for (int ic = 1; ic < probs.c; ++ic)
        if (s[ic * hw + i] > bv) {  // strict: ties resolve to the lowest class
          bv = s[ic * hw + i];
          best = ic;
        }
      out.labels[o] = best;
    }
  }
  return out;
}

inline std::vector<long long> label_histogram(const LabelBatch& labels, int num_classes) {
  std::vector<long long> hist(num_classes, 0);
  for (int c : labels.labels) {
    require(c >= 0 && c < num_classes, "label out of range");
    ++hist[c];
  }
  return hist;
}

/// Inverse-occupancy class weights on the simplex. Empty classes get the
/// largest weight; the smoothing constant keeps them finite.
inline std::vector<double> class_weights(const std::vector<long long>& histogram,
                                         double smoothing) {
  require(smoothing > 0, "class_weights: smoothing must be > 0");
  std::vector<double> w(histogram.size());
  double norm = 0;
  for (std::size_t k = 0; k < histogram.size(); ++k) {
    require(histogram[k] >= 0, "class_weights: negative count");
    w[k] = smoothing / (static_cast<double>(histogram[k]) + smoothing);
    norm += w[k];
  }
  for (auto& x : w) x /= norm;
  return w;
}

/// Class-balanced cross-entropy against (frozen) pseudo-labels. The
/// num_classes multiplier makes the weighted loss coincide with plain mean
/// cross-entropy whenever the label histogram is uniform. Labels are treated
/// as constants: gradients flow only through the logits.
///
/// With `weighted == false` the per-class weights are uniform and the loss is
/// exactly the unweighted mean cross-entropy.
template <typename T>
double clustering_loss(const nn::Tensor4<T>& logits, const LabelBatch& labels,
                       double smoothing, bool weighted = true,
                       nn::Tensor4<T>* grad = nullptr,
                       std::vector<long long>* histogram_out = nullptr) {
  require(labels.n == logits.n && labels.h == logits.h && labels.w == logits.w,
          "clustering_loss: label/logit shape mismatch");
  const int num_classes = logits.c;
  const auto hist = label_histogram(labels, num_classes);
  std::vector<double> w;
  if (weighted) {
    w = class_weights(hist, smoothing);
  } else {
    w.assign(num_classes, 1.0 / num_classes);
  }
  const std::size_t hw = logits.plane();
  const double denom = static_cast<double>(logits.n) * hw;
  if (grad) *grad = nn::Tensor4<T>(logits.n, logits.c, logits.h, logits.w);

  double loss = 0;
  std::size_t o = 0;
  std::vector<double> p(num_classes);
  for (int in = 0; in < logits.n; ++in) {
    const T* s = logits.sample(in);
    T* g = grad ? grad->sample(in) : nullptr;
    for (std::size_t i = 0; i < hw; ++i, ++o) {
      const int cls = labels.labels[o];
      const double factor = num_classes * w[cls] / denom;
      double m = s[i];
      for (int ic = 1; ic < num_classes; ++ic)
        m = std::max(m, static_cast<double>(s[ic * hw + i]));
      double z = 0;
      for (int ic = 0; ic < num_classes; ++ic) {
        p[ic] = std::exp(static_cast<double>(s[ic * hw + i]) - m);
        z += p[ic];
      }
      loss += factor * (-(static_cast<double>(s[cls * hw + i]) - m - std::log(z)));
      if (g) {
        for (int ic = 0; ic < num_classes; ++ic) {
          const double soft = p[ic] / z;
          g[ic * hw + i] += static_cast<T>(factor * (soft - (ic == cls ? 1.0 : 0.0)));
        }
      }
    }
  }
  if (histogram_out) *histogram_out = hist;
  return loss;
}

/// Mean per-pixel L1 distance between two class-probability batches.
template <typename T>
double positive_pair_loss(const nn::Tensor4<T>& probs, const nn::Tensor4<T>& probs_aug) {
  require(probs.same_shape(probs_aug), "positive_pair_loss: shape mismatch");
  const std::size_t hw = probs.plane();
  double sum = 0;
  for (int in = 0; in < probs.n; ++in) {
    const T* a = probs.sample(in);
    const T* b = probs_aug.sample(in);
    const std::size_t len = probs.sample_stride();
    for (std::size_t i = 0; i < len; ++i) sum += std::abs(static_cast<double>(a[i]) - b[i]);
  }
  return sum / (static_cast<double>(probs.n) * hw);
}

template <typename T>
double negative_pair_loss(const nn::Tensor4<T>& probs, const nn::Tensor4<T>& probs_shuffled) {
  return -positive_pair_loss(probs, probs_shuffled);
}

namespace detail {

/// Gradient of scale * mean_i ||softmax(za)_i - softmax(zb)_i||_1 w.r.t. both
/// logit batches, accumulated in place. Pass a negative scale for the
/// negative-pair term.
template <typename T>
void l1_pair_grad(const nn::Tensor4<T>& pa, const nn::Tensor4<T>& pb, double scale,
                  nn::Tensor4<T>& dza, nn::Tensor4<T>& dzb) {
  const std::size_t hw = pa.plane();
  const double factor = scale / (static_cast<double>(pa.n) * hw);
  const int nc = pa.c;
  for (int in = 0; in < pa.n; ++in) {
    const T* a = pa.sample(in);
    const T* b = pb.sample(in);
    T* ga = dza.sample(in);
    T* gb = dzb.sample(in);
    for (std::size_t i = 0; i < hw; ++i) {
      double dot_a = 0, dot_b = 0;
      for (int ic = 0; ic < nc; ++ic) {
        const double d = static_cast<double>(a[ic * hw + i]) - b[ic * hw + i];
        const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        dot_a += s * a[ic * hw + i];
        dot_b += s * b[ic * hw + i];
      }
      for (int ic = 0; ic < nc; ++ic) {
        const double d = static_cast<double>(a[ic * hw + i]) - b[ic * hw + i];
        const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        ga[ic * hw + i] += static_cast<T>(factor * a[ic * hw + i] * (s - dot_a));
        gb[ic * hw + i] += static_cast<T>(-factor * b[ic * hw + i] * (s - dot_b));
      }
    }
  }
}

}  // namespace detail

/// Gradients of the total loss w.r.t. the three logit batches.
template <typename T>
struct TripletGrads {
  nn::Tensor4<T> standard, augmented, shuffled;
};

/// The full training objective over one batch triplet:
///   total = clustering_w * (L_std + L_aug) + positive_w * L_pos + negative_w * L_neg
/// Softmax is computed once per branch; pseudo-labels come from each
/// clustering branch's own probabilities and are frozen before
/// differentiation.
template <typename T>
LossReport total_loss(const nn::Tensor4<T>& logits_standard,
                      const nn::Tensor4<T>& logits_augmented,
                      const nn::Tensor4<T>& logits_shuffled, const LossWeights& weights,
                      TripletGrads<T>* grads = nullptr) {
  require(logits_standard.same_shape(logits_augmented) &&
              logits_standard.same_shape(logits_shuffled),
          "total_loss: logit batch shape mismatch");
  weights.validate();

  const auto p_std = nn::softmax_channels(logits_standard);
  const auto p_aug = nn::softmax_channels(logits_augmented);
  const auto p_shuf = nn::softmax_channels(logits_shuffled);

  if (grads) {
    grads->standard = nn::Tensor4<T>(logits_standard.n, logits_standard.c, logits_standard.h,
                                     logits_standard.w);
    grads->augmented = grads->standard;
    grads->shuffled = grads->standard;
  }

  LossReport report;
  const auto labels_std = pseudo_labels(p_std);
  const auto labels_aug = pseudo_labels(p_aug);

  nn::Tensor4<T> g_std, g_aug;
  report.clustering =
      clustering_loss(logits_standard, labels_std, weights.class_smoothing,
                      weights.weighted_clustering, grads ? &g_std : nullptr,
                      &report.class_histogram);
  report.clustering_aug =
      clustering_loss(logits_augmented, labels_aug, weights.class_smoothing,
                      weights.weighted_clustering, grads ? &g_aug : nullptr);

  report.positive = positive_pair_loss(p_std, p_aug);
  report.negative = negative_pair_loss(p_std, p_shuf);
  report.total = weights.clustering * (report.clustering + report.clustering_aug) +
                 weights.positive * report.positive + weights.negative * report.negative;

  if (grads) {
    for (std::size_t i = 0; i < g_std.v.size(); ++i) {
      grads->standard.v[i] += static_cast<T>(weights.clustering) * g_std.v[i];
      grads->augmented.v[i] += static_cast<T>(weights.clustering) * g_aug.v[i];
    }
    detail::l1_pair_grad(p_std, p_aug, weights.positive, grads->standard, grads->augmented);
    detail::l1_pair_grad(p_std, p_shuf, -weights.negative, grads->standard, grads->shuffled);
  }
  return report;
}

/// Soft Dice loss with unit smoothing, in [0, 1).
template <typename T>
double dice_loss(const nn::Tensor4<T>& pred, const nn::Tensor4<T>& target,
                 nn::Tensor4<T>* grad = nullptr) {
  require(pred.same_shape(target), "dice_loss: shape mismatch");
  constexpr double kSmooth = 1.0;
  double inter = 0, sum_p = 0, sum_t = 0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    inter += static_cast<double>(pred.v[i]) * target.v[i];
    sum_p += pred.v[i];
    sum_t += target.v[i];
  }
  const double denom = sum_p + sum_t + kSmooth;
  const double loss = 1.0 - (2.0 * inter + kSmooth) / denom;
  if (grad) {
    *grad = nn::Tensor4<T>(pred.n, pred.c, pred.h, pred.w);
    const double num = 2.0 * inter + kSmooth;
    for (std::size_t i = 0; i < pred.v.size(); ++i)
      grad->v[i] = static_cast<T>(-(2.0 * target.v[i] * denom - num) / (denom * denom));
  }
  return loss;
}

}  // namespace wetseg
