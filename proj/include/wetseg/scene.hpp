#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wetseg/geotiff.hpp"
#include "wetseg/image.hpp"

namespace wetseg {

struct ScalingSpec {
  enum class Mode { FixedRange, MinMax };
  Mode mode = Mode::FixedRange;
  double low = -30.0;  // dB floor for the fixed-range default
  double high = 0.0;

  static ScalingSpec fixed(double low, double high) {
    return {Mode::FixedRange, low, high};
  }
  static ScalingSpec minmax() { return {Mode::MinMax, 0, 0}; }
};

/// The scaling actually applied to a scene, recorded for reporting.
struct ScalingApplied {
  std::string mode;
  double low = 0;
  double high = 0;
};

struct Scene {
  ImageF pixels;  // scaled to [0,1]
  std::optional<MaskImage> mask;
  std::string scene_id;
  double pixel_size_m = 10.0;
  GeoMetadata geo;
  ScalingApplied scaling;

  int rows() const { return pixels.rows(); }
  int cols() const { return pixels.cols(); }
};

struct Tile {
  ImageF pixels;
  std::optional<MaskImage> mask;
  int row0 = 0;
  int col0 = 0;
  std::string scene_id;

  int size() const { return pixels.rows(); }
  std::string id() const {
    return scene_id + ":" + std::to_string(row0) + "," + std::to_string(col0);
  }
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

namespace detail {

inline ImageF scale_pixels(const std::vector<double>& raw, int rows, int cols,
                           const ScalingSpec& spec, ScalingApplied& applied) {
  double lo, hi;
  if (spec.mode == ScalingSpec::Mode::MinMax) {
    lo = *std::min_element(raw.begin(), raw.end());
    hi = *std::max_element(raw.begin(), raw.end());
    applied.mode = "minmax";
  } else {
    lo = spec.low;
    hi = spec.high;
    require(hi > lo, "ScalingSpec: fixed range must have high > low");
    applied.mode = "fixed";
  }
  applied.low = lo;
  applied.high = hi;
  ImageF out(rows, cols);
  if (hi <= lo) {
    // degenerate (constant) scene: map everything to zero
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.raw()[i] = static_cast<float>(std::clamp((raw[i] - lo) * inv, 0.0, 1.0));
  return out;
}

}  // namespace detail

/// Loads a single-band radar raster (and optional {0,1} mask), rescaling
/// backscatter linearly into [0,1].
inline Scene load_scene(const std::string& path,
                        const std::optional<std::string>& mask_path = std::nullopt,
                        const ScalingSpec& scaling = {}) {
  RasterData raster = read_geotiff(path);
  Scene scene;
  scene.scene_id = std::filesystem::path(path).stem().string();
  scene.geo = raster.geo;
  if (raster.geo.pixel_scale.size() >= 1 && raster.geo.pixel_scale[0] > 0)
    scene.pixel_size_m = raster.geo.pixel_scale[0];
  scene.pixels = detail::scale_pixels(raster.values, raster.rows, raster.cols, scaling,
                                      scene.scaling);
  if (mask_path) {
    RasterData m = read_geotiff(*mask_path);
    if (m.rows != raster.rows || m.cols != raster.cols)
      fail("load_scene: mask dimensions do not match the scene");
    MaskImage mask(m.rows, m.cols);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      const double v = m.values[i];
      if (v != 0.0 && v != 1.0)
        fail("load_scene: mask contains values outside {0,1}");
      mask.raw()[i] = static_cast<std::uint8_t>(v);
    }
    scene.mask = std::move(mask);
  }
  return scene;
}

/// Cuts the scene into a non-overlapping grid of size x size tiles in row-major
/// grid order. Partial tiles at the right/bottom edges are discarded.
inline std::vector<Tile> tile_scene(const Scene& scene, int size) {
  require(size >= 2, "tile_scene: tile size must be >= 2");
  std::vector<Tile> tiles;
  const int ny = scene.rows() / size;
  const int nx = scene.cols() / size;
  tiles.reserve(static_cast<std::size_t>(std::max(0, ny)) * std::max(0, nx));
  for (int ty = 0; ty < ny; ++ty)
    for (int tx = 0; tx < nx; ++tx) {
      Tile t;
      t.row0 = ty * size;
      t.col0 = tx * size;
      t.scene_id = scene.scene_id;
      t.pixels = scene.pixels.crop(t.row0, t.col0, size, size);
      if (scene.mask) t.mask = scene.mask->crop(t.row0, t.col0, size, size);
      tiles.push_back(std::move(t));
    }
  return tiles;
}

/// Deterministic shuffle-then-partition split. The same (tiles, fractions,
/// seed) always produces identical membership. Train count is floored; when
/// the fractions sum to one the remainder goes to validation.
inline DatasetSplit split_dataset(std::size_t num_tiles, double train_fraction,
                                  double val_fraction, std::uint64_t seed) {
  require(num_tiles > 0, "split_dataset: empty tile list");
  require(train_fraction > 0 && val_fraction >= 0 &&
              train_fraction + val_fraction <= 1.0 + 1e-12,
          "split_dataset: invalid fractions");
  std::vector<std::size_t> order(num_tiles);
  for (std::size_t i = 0; i < num_tiles; ++i) order[i] = i;
  auto rng = make_rng(seed, /*stream=*/0x5b11u);
  for (std::size_t i = num_tiles - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = static_cast<std::size_t>(train_fraction * num_tiles);
  std::size_t n_val;
  if (train_fraction + val_fraction >= 1.0 - 1e-12)
    n_val = num_tiles - n_train;
  else
    n_val = static_cast<std::size_t>(val_fraction * num_tiles);

  DatasetSplit split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

inline const char* split_name(const DatasetSplit& split, std::size_t index) {
  for (auto i : split.train)
    if (i == index) return "train";
  for (auto i : split.validation)
    if (i == index) return "validation";
  for (auto i : split.test)
    if (i == index) return "test";
  return "none";
}

// ---------------------------------------------------------------------------
// Tile persistence: a directory of rasters plus a manifest (one record per
// tile: id, parent scene, origin, split assignment, file names).
// ---------------------------------------------------------------------------

inline void save_tiles(const std::string& dir, const std::vector<Tile>& tiles,
                       const DatasetSplit& split, const GeoMetadata& geo = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) fail("save_tiles: cannot create manifest in " + dir);
  manifest << "tile_id\tscene_id\trow\tcol\tsize\tsplit\tpixels\tmask\n";
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const Tile& t = tiles[i];
    const std::string base = "tile_" + std::to_string(i);
    const std::string pix_name = base + ".tif";
    write_geotiff((fs::path(dir) / pix_name).string(), t.pixels, geo);
    std::string mask_name = "-";
    if (t.mask) {
      mask_name = base + "_mask.tif";
      write_geotiff((fs::path(dir) / mask_name).string(), *t.mask, geo);
    }
    manifest << t.id() << '\t' << t.scene_id << '\t' << t.row0 << '\t' << t.col0 << '\t'
             << t.size() << '\t' << split_name(split, i) << '\t' << pix_name << '\t'
             << mask_name << '\n';
  }
}

struct LoadedTiles {
  std::vector<Tile> tiles;
  DatasetSplit split;
};

inline LoadedTiles load_tiles(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) fail("load_tiles: no manifest in " + dir);
  std::string line;
  std::getline(manifest, line);  // header
  LoadedTiles out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tile_id, scene_id, split_tag, pix_name, mask_name;
    int row, col, size;
    std::getline(ss, tile_id, '\t');
    std::getline(ss, scene_id, '\t');
    ss >> row >> col >> size;
    ss.ignore(1);
    std::getline(ss, split_tag, '\t');
    std::getline(ss, pix_name, '\t');
    std::getline(ss, mask_name, '\t');

    Tile t;
    t.scene_id = scene_id;
    t.row0 = row;
    t.col0 = col;
    RasterData pix = read_geotiff((fs::path(dir) / pix_name).string());
    t.pixels = ImageF(pix.rows, pix.cols);
    for (std::size_t i = 0; i < pix.values.size(); ++i)
      t.pixels.raw()[i] = static_cast<float>(pix.values[i]);
    if (mask_name != "-" && !mask_name.empty()) {
      RasterData m = read_geotiff((fs::path(dir) / mask_name).string());
      MaskImage mask(m.rows, m.cols);
      for (std::size_t i = 0; i < m.values.size(); ++i)
        mask.raw()[i] = static_cast<std::uint8_t>(m.values[i]);
      t.mask = std::move(mask);
    }
    const std::size_t index = out.tiles.size();
    if (split_tag == "train")
      out.split.train.push_back(index);
    else if (split_tag == "validation")
      out.split.validation.push_back(index);
    else if (split_tag == "test")
      out.split.test.push_back(index);
    out.tiles.push_back(std::move(t));
  }
  if (out.tiles.empty()) fail("load_tiles: manifest lists no tiles");
  return out;
}

}  // namespace wetseg
