#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wetseg/image.hpp"

namespace wetseg {

/// Separable Gaussian blur with symmetric reflection at the borders.
/// The kernel is normalized, so constant inputs are exact fixed points.
inline ImageF gaussian_blur(const ImageF& tile, double sigma, int kernel = 5) {
  require(kernel >= 3 && kernel % 2 == 1, "gaussian_blur: kernel must be odd and >= 3");
  require(sigma > 0, "gaussian_blur: sigma must be positive");
  const int r = kernel / 2;
  std::vector<double> k(kernel);
  double norm = 0;
  for (int j = -r; j <= r; ++j) {
    k[j + r] = std::exp(-(static_cast<double>(j) * j) / (2.0 * sigma * sigma));
    norm += k[j + r];
  }
  for (auto& v : k) v /= norm;

  const int rows = tile.rows(), cols = tile.cols();
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };

  ImageF tmp(rows, cols), out(rows, cols);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      double acc = 0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * tile(y, reflect(x + j, cols));
      tmp(y, x) = static_cast<float>(acc);
    }
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      double acc = 0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * tmp(reflect(y + j, rows), x);
      out(y, x) = static_cast<float>(acc);
    }
  return out;
}

struct AugmentConfig {
  double sigma_low = 1.0;
  double sigma_high = 2.0;
  int blur_kernel = 5;
  double flip_prob = 0.5;
  bool shared_flips = true;  // same flips on the standard and augmented copy

  void validate() const {
    require(flip_prob >= 0 && flip_prob <= 1, "AugmentConfig: flip_prob outside [0,1]");
    require(sigma_low <= sigma_high && sigma_low > 0, "AugmentConfig: bad sigma range");
    require(blur_kernel >= 3 && blur_kernel % 2 == 1, "AugmentConfig: kernel must be odd");
  }
};

struct TileBatch {
  std::vector<ImageF> pixels;
  std::vector<MaskImage> masks;  // empty, or one per tile
  std::vector<std::string> tile_ids;

  std::size_t size() const { return pixels.size(); }
  int tile_size() const { return pixels.empty() ? 0 : pixels.front().rows(); }
};

struct FlipState {
  bool horizontal = false;
  bool vertical = false;
};

struct BatchTriplet {
  TileBatch standard;
  TileBatch augmented;  // blurred, spatially aligned with `standard`
  TileBatch shuffled;   // the augmented tiles in deranged order
  std::vector<int> permutation;
  std::vector<FlipState> flips;   // flips applied to the standard copies
  std::vector<double> sigmas;     // per-tile blur strength
};

template <typename T>
Image<T> apply_flips(const Image<T>& im, FlipState f) {
  Image<T> out = im;
  if (f.horizontal) out = flip_horizontal(out);
  if (f.vertical) out = flip_vertical(out);
  return out;
}

namespace detail {

/// Uniform derangement by rejection; every index must move.
inline std::vector<int> draw_derangement(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  while (true) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[i], perm[j]);
    }
    bool fixed_point = false;
    for (int i = 0; i < n; ++i)
      if (perm[i] == i) {
        fixed_point = true;
        break;
      }
    if (!fixed_point) return perm;
  }
}

}  // namespace detail

/// Builds the three parallel batches used by one training step: the standard
/// batch, its blurred counterpart (same flips, so positive pairs stay
/// spatially aligned) and the deranged copy providing negative pairs.
inline BatchTriplet make_triplet(const TileBatch& batch, std::uint64_t seed,
                                 const AugmentConfig& cfg = {}) {
  cfg.validate();
  require(batch.size() >= 2,
          "make_triplet: negative pairs need at least two tiles per batch");
  const int n = static_cast<int>(batch.size());
  const bool has_masks = !batch.masks.empty();

  auto rng = make_rng(seed, /*stream=*/0xa06u);
  auto uniform01 = [&rng]() { return (rng() >> 11) * (1.0 / 9007199254740992.0); };

  BatchTriplet out;
  out.standard.tile_ids = batch.tile_ids;
  out.augmented.tile_ids = batch.tile_ids;
  out.flips.resize(n);
  out.sigmas.resize(n);

  for (int i = 0; i < n; ++i) {
    FlipState f{uniform01() < cfg.flip_prob, uniform01() < cfg.flip_prob};
    FlipState fa = f;
    if (!cfg.shared_flips)
      fa = FlipState{uniform01() < cfg.flip_prob, uniform01() < cfg.flip_prob};
    const double sigma = cfg.sigma_low + (cfg.sigma_high - cfg.sigma_low) * uniform01();
    out.flips[i] = f;
    out.sigmas[i] = sigma;

    out.standard.pixels.push_back(apply_flips(batch.pixels[i], f));
    out.augmented.pixels.push_back(
        gaussian_blur(apply_flips(batch.pixels[i], fa), sigma, cfg.blur_kernel));
    if (has_masks) {
      out.standard.masks.push_back(apply_flips(batch.masks[i], f));
      out.augmented.masks.push_back(apply_flips(batch.masks[i], fa));
    }
  }

  out.permutation = detail::draw_derangement(n, rng);
  out.shuffled.pixels.resize(n);
  out.shuffled.tile_ids.resize(n);
  if (has_masks) out.shuffled.masks.resize(n);
  for (int kk = 0; kk < n; ++kk) {
    out.shuffled.pixels[kk] = out.augmented.pixels[out.permutation[kk]];
    out.shuffled.tile_ids[kk] = out.augmented.tile_ids[out.permutation[kk]];
    if (has_masks) out.shuffled.masks[kk] = out.augmented.masks[out.permutation[kk]];
  }
  return out;
}

}  // namespace wetseg
