#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wetseg/augment.hpp"
#include "wetseg/nn/layers.hpp"
#include "wetseg/scene.hpp"

namespace wetseg {

/// Desk-scale stand-in for real radar acquisitions: irregular water bodies on
/// land, under multiplicative gamma speckle.
struct SynthSpec {
  int rows = 512;
  int cols = 512;
  double water_fraction = 0.3;  // target fraction of water pixels
  double blob_scale = 24.0;     // correlation length of the blob field, in pixels
  double land_mean = 0.55;
  double water_mean = 0.15;
  double looks = 4.0;  // gamma speckle shape; larger means less noise

  void validate() const {
    require(rows > 0 && cols > 0, "SynthSpec: non-positive size");
    require(water_fraction >= 0 && water_fraction < 1, "SynthSpec: water_fraction in [0,1)");
    require(water_mean < land_mean, "SynthSpec: water must be darker than land");
    require(looks > 0, "SynthSpec: speckle looks must be positive");
    require(blob_scale > 0, "SynthSpec: blob_scale must be positive");
  }
};

/// Deterministic per (spec, seed). The water mask thresholds a smoothed
/// Gaussian noise field at the quantile matching the target fraction, which
/// yields irregular, wetland-like blobs; pixels are the class mean field
/// multiplied by unit-mean gamma speckle and clipped to [0,1].
inline Scene generate_synthetic_scene(const SynthSpec& spec, std::uint64_t seed,
                                      const std::string& scene_id = "synthetic") {
  spec.validate();
  Scene scene;
  scene.scene_id = scene_id;
  scene.scaling = {"synthetic", 0.0, 1.0};

  MaskImage mask(spec.rows, spec.cols, 0);
  if (spec.water_fraction > 0) {
    auto rng = make_rng(seed, /*stream=*/0xb10bu);
    nn::NormalSampler<float> normal(rng);
    ImageF field(spec.rows, spec.cols);
    for (auto& v : field.raw()) v = normal(1.0);
    const int kernel = 2 * static_cast<int>(std::ceil(3.0 * spec.blob_scale)) + 1;
    field = gaussian_blur(field, spec.blob_scale, kernel);

    std::vector<float> sorted(field.raw());
    const std::size_t cut = static_cast<std::size_t>(
        (1.0 - spec.water_fraction) * static_cast<double>(sorted.size()));
    std::nth_element(sorted.begin(), sorted.begin() + std::min(cut, sorted.size() - 1),
                     sorted.end());
    const float threshold = sorted[std::min(cut, sorted.size() - 1)];
    for (std::size_t i = 0; i < mask.raw().size(); ++i)
      mask.raw()[i] = field.raw()[i] > threshold ? 1 : 0;
  }

  auto speckle_rng = make_rng(seed, /*stream=*/0x5eccu);
  std::gamma_distribution<double> gamma(spec.looks, 1.0 / spec.looks);
  ImageF pixels(spec.rows, spec.cols);
  for (std::size_t i = 0; i < pixels.raw().size(); ++i) {
    const double mean = mask.raw()[i] ? spec.water_mean : spec.land_mean;
    pixels.raw()[i] = static_cast<float>(std::clamp(mean * gamma(speckle_rng), 0.0, 1.0));
  }
  scene.pixels = std::move(pixels);
  scene.mask = std::move(mask);
  return scene;
}

}  // namespace wetseg
