#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wetseg/augment.hpp"
#include "wetseg/image.hpp"
#include "wetseg/scene.hpp"

namespace wetseg {

struct OtsuConfig {
  int blur_kernel = 5;
  double blur_sigma = 1.1;  // conventional sigma for a 5x5 kernel
  int morph_kernel = 3;
  int morph_iterations = 7;
  int histogram_bins = 256;
  // `true` runs each operation as erode^n then dilate^n (and mirrored for
  // closing); `false` alternates n full open/close passes instead.
  bool batched_morph_iterations = true;

  void validate() const {
    require(blur_kernel % 2 == 1 && morph_kernel % 2 == 1, "OtsuConfig: kernels must be odd");
    require(morph_iterations >= 0, "OtsuConfig: negative iterations");
    require(histogram_bins >= 2, "OtsuConfig: need at least 2 bins");
    require(blur_sigma > 0, "OtsuConfig: blur_sigma must be positive");
  }
};

struct OtsuThreshold {
  int bin = 0;       // last bin of the dark class
  double value = 0;  // threshold on the [0,1] pixel scale
  bool degenerate = false;  // constant input; `value` is that constant
};

namespace detail {

inline int quantize(float v, int bins) {
  int b = static_cast<int>(v * bins);
  return std::clamp(b, 0, bins - 1);
}

}  // namespace detail

/// Global threshold maximizing the between-class variance of the quantized
/// intensity histogram. Equal maxima resolve to the lowest threshold;
/// constant images return their single value.
inline OtsuThreshold otsu_threshold(const ImageF& pixels, int bins = 256) {
  require(!pixels.empty(), "otsu_threshold: empty input");
  require(bins >= 2, "otsu_threshold: need at least 2 bins");
  std::vector<long long> hist(bins, 0);
  for (float v : pixels.raw()) ++hist[detail::quantize(v, bins)];

  int occupied = 0;
  for (auto h : hist)
    if (h > 0) ++occupied;
  if (occupied <= 1) {
    OtsuThreshold t;
    t.degenerate = true;
    t.value = pixels.raw().front();
    t.bin = detail::quantize(pixels.raw().front(), bins);
    return t;
  }

  const double total = static_cast<double>(pixels.size());
  double total_mean = 0;
  for (int b = 0; b < bins; ++b) total_mean += b * static_cast<double>(hist[b]);
  total_mean /= total;

  double w0 = 0, sum0 = 0, best = -1.0;
  int best_bin = 0;
  for (int t = 0; t < bins - 1; ++t) {
    w0 += static_cast<double>(hist[t]) / total;
    sum0 += t * static_cast<double>(hist[t]) / total;
    const double w1 = 1.0 - w0;
    if (w0 <= 0 || w1 <= 0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_mean - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {  // strict: ties keep the lowest threshold
      best = between;
      best_bin = t;
    }
  }
  OtsuThreshold t;
  t.bin = best_bin;
  t.value = static_cast<double>(best_bin + 1) / bins;
  return t;
}

// ---------------------------------------------------------------------------
// Binary morphology with a full square structuring element. Border rule:
// outside the image, erosion sees water and dilation sees land. This keeps
// opening anti-extensive and closing extensive pixelwise, borders included
// (land-padding the erosion would let closing eat water at the image edge).
// ---------------------------------------------------------------------------

namespace detail {

inline MaskImage erode_once(const MaskImage& mask, int kernel) {
  const int r = kernel / 2;
  MaskImage out(mask.rows(), mask.cols());
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x) {
      std::uint8_t v = 1;
      for (int dy = -r; dy <= r && v; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= mask.rows() || xx < 0 || xx >= mask.cols()) continue;
          if (!mask(yy, xx)) {
            v = 0;
            break;
          }
        }
      out(y, x) = v;
    }
  return out;
}

inline MaskImage dilate_once(const MaskImage& mask, int kernel) {
  const int r = kernel / 2;
  MaskImage out(mask.rows(), mask.cols());
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x) {
      std::uint8_t v = 0;
      for (int dy = -r; dy <= r && !v; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < mask.rows() && xx >= 0 && xx < mask.cols() && mask(yy, xx)) {
            v = 1;
            break;
          }
        }
      out(y, x) = v;
    }
  return out;
}

}  // namespace detail

inline MaskImage erode(const MaskImage& mask, int kernel, int iterations) {
  require(kernel % 2 == 1 && kernel >= 1, "erode: kernel must be odd");
  require(is_binary(mask), "erode: non-binary input");
  MaskImage out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::erode_once(out, kernel);
  return out;
}

inline MaskImage dilate(const MaskImage& mask, int kernel, int iterations) {
  require(kernel % 2 == 1 && kernel >= 1, "dilate: kernel must be odd");
  require(is_binary(mask), "dilate: non-binary input");
  MaskImage out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::dilate_once(out, kernel);
  return out;
}

inline MaskImage morph_open(const MaskImage& mask, int kernel, int iterations,
                            bool batched = true) {
  if (batched) return dilate(erode(mask, kernel, iterations), kernel, iterations);
  MaskImage out = mask;
  for (int i = 0; i < iterations; ++i) out = dilate(erode(out, kernel, 1), kernel, 1);
  return out;
}

inline MaskImage morph_close(const MaskImage& mask, int kernel, int iterations,
                             bool batched = true) {
  if (batched) return erode(dilate(mask, kernel, iterations), kernel, iterations);
  MaskImage out = mask;
  for (int i = 0; i < iterations; ++i) out = erode(dilate(out, kernel, 1), kernel, 1);
  return out;
}

/// The classical baseline: optional Gaussian blur, Otsu threshold with water
/// as the dark class, then optional opening and closing.
inline MaskImage otsu_segment(const Scene& scene, const OtsuConfig& cfg = {},
                              bool use_pre = true, bool use_post = true) {
  cfg.validate();
  ImageF work = scene.pixels;
  if (use_pre) work = gaussian_blur(work, cfg.blur_sigma, cfg.blur_kernel);
  const OtsuThreshold t = otsu_threshold(work, cfg.histogram_bins);
  MaskImage mask(work.rows(), work.cols());
  if (!t.degenerate) {
    for (std::size_t i = 0; i < work.raw().size(); ++i)
      mask.raw()[i] =
          detail::quantize(work.raw()[i], cfg.histogram_bins) <= t.bin ? 1 : 0;
  }
  if (use_post && cfg.morph_iterations > 0) {
    mask = morph_open(mask, cfg.morph_kernel, cfg.morph_iterations,
                      cfg.batched_morph_iterations);
    mask = morph_close(mask, cfg.morph_kernel, cfg.morph_iterations,
                       cfg.batched_morph_iterations);
  }
  return mask;
}

}  // namespace wetseg
