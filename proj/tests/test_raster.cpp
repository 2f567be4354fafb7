#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "wetseg/scene.hpp"
#include "wetseg/synthetic.hpp"

using namespace wetseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("wetseg_raster_" + std::to_string(
                                                    std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ImageF db_ramp(int rows, int cols) {
  // values running from -30 dB to 0 dB
  ImageF img(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      img(r, c) = -30.0f + 30.0f * (r * cols + c) / (rows * cols - 1);
  return img;
}

}  // namespace

TEST_CASE("geotiff round trip with georeferencing carried through") {
  TempDir tmp;
  const auto path = (tmp.path / "scene.tif").string();

  ImageF img = db_ramp(20, 30);
  GeoMetadata geo;
  geo.pixel_scale = {10.0, 10.0, 0.0};
  geo.tiepoints = {0, 0, 0, 500000.0, 6500000.0, 0.0};
  geo.key_directory = {1, 1, 0, 1, 1024, 0, 1, 1};
  write_geotiff(path, img, geo);

  auto raster = read_geotiff(path);
  REQUIRE(raster.rows == 20);
  REQUIRE(raster.cols == 30);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 30; ++c)
      CHECK(raster.values[r * 30 + c] == Catch::Approx(img(r, c)).margin(1e-6));
  CHECK(raster.geo.pixel_scale == geo.pixel_scale);
  CHECK(raster.geo.tiepoints == geo.tiepoints);
  CHECK(raster.geo.key_directory == geo.key_directory);
}

TEST_CASE("load_scene scaling modes") {
  TempDir tmp;
  const auto path = (tmp.path / "scene.tif").string();

  SECTION("fixed range maps -15 dB to 0.5") {
    write_geotiff(path, db_ramp(16, 16));
    auto scene = load_scene(path, std::nullopt, ScalingSpec::fixed(-30, 0));
    // find the pixel closest to -15 dB
    int best_i = 0;
    float best = 1e9;
    ImageF src = db_ramp(16, 16);
    for (int i = 0; i < 256; ++i)
      if (std::abs(src.raw()[i] + 15.0f) < best) {
        best = std::abs(src.raw()[i] + 15.0f);
        best_i = i;
      }
    CHECK(scene.pixels.raw()[best_i] == Catch::Approx(0.5).margin(0.01));
    CHECK(scene.scaling.mode == "fixed");
    CHECK(scene.scaling.low == -30.0);
  }

  SECTION("constant raster under min-max maps to all zeros") {
    write_geotiff(path, ImageF(8, 8, 7.5f));
    auto scene = load_scene(path, std::nullopt, ScalingSpec::minmax());
    for (float v : scene.pixels.raw()) CHECK(v == 0.0f);
  }

  SECTION("values are clipped into [0,1]") {
    write_geotiff(path, db_ramp(16, 16));
    auto scene = load_scene(path, std::nullopt, ScalingSpec::fixed(-20, -10));
    for (float v : scene.pixels.raw()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  SECTION("unreadable path fails") {
    CHECK_THROWS(load_scene((tmp.path / "missing.tif").string()));
  }
}

TEST_CASE("load_scene mask validation") {
  TempDir tmp;
  const auto scene_path = (tmp.path / "s.tif").string();
  const auto mask_path = (tmp.path / "m.tif").string();
  write_geotiff(scene_path, db_ramp(10, 10));

  SECTION("well-formed mask") {
    MaskImage m(10, 10, 0);
    m(3, 3) = 1;
    write_geotiff(mask_path, m);
    auto scene = load_scene(scene_path, mask_path);
    REQUIRE(scene.mask.has_value());
    CHECK((*scene.mask)(3, 3) == 1);
    CHECK((*scene.mask)(0, 0) == 0);
  }

  SECTION("dimension mismatch") {
    write_geotiff(mask_path, MaskImage(4, 4, 0));
    CHECK_THROWS(load_scene(scene_path, mask_path));
  }

  SECTION("values outside {0,1}") {
    write_geotiff(mask_path, MaskImage(10, 10, 3));
    CHECK_THROWS(load_scene(scene_path, mask_path));
  }
}

TEST_CASE("tiling grid counts") {
  Scene scene;
  scene.scene_id = "t";

  scene.pixels = ImageF(1024, 1536, 0.5f);
  CHECK(tile_scene(scene, 512).size() == 6);  // 2 x 3

  scene.pixels = ImageF(512, 700, 0.5f);
  auto tiles = tile_scene(scene, 512);
  CHECK(tiles.size() == 1);  // the 188-pixel remainder column is dropped

  scene.pixels = ImageF(100, 100, 0.5f);
  CHECK(tile_scene(scene, 512).empty());

  scene.pixels = ImageF(1024, 1024, 0.5f);
  CHECK(tile_scene(scene, 512).size() == 4);

  CHECK_THROWS(tile_scene(scene, 1));
}

TEST_CASE("tiling is a lossless partition of the covered region") {
  SynthSpec spec;
  spec.rows = 96;
  spec.cols = 130;  // forces a dropped partial column
  spec.water_fraction = 0.4;
  auto scene = generate_synthetic_scene(spec, 3);
  auto tiles = tile_scene(scene, 32);
  REQUIRE(tiles.size() == 3 * 4);

  // reassembling at the origins reproduces the cropped scene exactly
  ImageF rebuilt(96, 128, -1.0f);
  MaskImage rebuilt_mask(96, 128, 0);
  long long tile_water = 0;
  for (const auto& t : tiles) {
    rebuilt.paste(t.pixels, t.row0, t.col0);
    REQUIRE(t.mask.has_value());
    rebuilt_mask.paste(*t.mask, t.row0, t.col0);
    for (auto v : t.mask->raw()) tile_water += v;
    CHECK(t.row0 + t.size() <= scene.rows());
    CHECK(t.col0 + t.size() <= scene.cols());
  }
  long long scene_water = 0;
  for (int r = 0; r < 96; ++r)
    for (int c = 0; c < 128; ++c) {
      CHECK(rebuilt(r, c) == scene.pixels(r, c));
      scene_water += (*scene.mask)(r, c);
    }
  CHECK(tile_water == scene_water);  // water conserved over the tiled region
}

TEST_CASE("dataset split") {
  SECTION("forced counts and disjointness") {
    auto s = split_dataset(10, 0.8, 0.2, 0);
    CHECK(s.train.size() == 8);
    CHECK(s.validation.size() == 2);
    CHECK(s.test.empty());
    std::vector<bool> seen(10, false);
    for (auto i : s.train) seen[i] = true;
    for (auto i : s.validation) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
    for (bool b : seen) CHECK(b);
  }

  SECTION("639 tiles at 80/20: floor on train, remainder to validation") {
    auto s = split_dataset(639, 0.8, 0.2, 42);
    CHECK(s.train.size() == 511);
    CHECK(s.validation.size() == 128);
  }

  SECTION("pure function of (count, fractions, seed)") {
    auto a = split_dataset(100, 0.7, 0.2, 9);
    auto b = split_dataset(100, 0.7, 0.2, 9);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
    CHECK(a.test.size() == 100 - a.train.size() - a.validation.size());
    auto c = split_dataset(100, 0.7, 0.2, 10);
    CHECK(a.train != c.train);
  }

  SECTION("invalid inputs") {
    CHECK_THROWS(split_dataset(0, 0.8, 0.2, 0));
    CHECK_THROWS(split_dataset(10, 0.0, 0.2, 0));
    CHECK_THROWS(split_dataset(10, 0.9, 0.2, 0));
  }
}

TEST_CASE("synthetic scenes") {
  SECTION("zero water fraction gives an all-land mask") {
    SynthSpec spec;
    spec.rows = spec.cols = 64;
    spec.water_fraction = 0.0;
    auto scene = generate_synthetic_scene(spec, 1);
    for (auto v : scene.mask->raw()) CHECK(v == 0);
  }

  SECTION("the high-looks limit recovers the mean field") {
    SynthSpec spec;
    spec.rows = spec.cols = 64;
    spec.looks = 1e6;
    auto scene = generate_synthetic_scene(spec, 2);
    for (std::size_t i = 0; i < scene.pixels.raw().size(); ++i) {
      const double expect = scene.mask->raw()[i] ? spec.water_mean : spec.land_mean;
      CHECK(scene.pixels.raw()[i] == Catch::Approx(expect).margin(0.01));
    }
  }

  SECTION("bit-identical under a fixed seed") {
    SynthSpec spec;
    spec.rows = spec.cols = 48;
    auto a = generate_synthetic_scene(spec, 5);
    auto b = generate_synthetic_scene(spec, 5);
    CHECK(a.pixels == b.pixels);
    CHECK(*a.mask == *b.mask);
    auto c = generate_synthetic_scene(spec, 6);
    CHECK_FALSE(a.pixels == c.pixels);
  }

  SECTION("water fraction lands near the target at full scale") {
    SynthSpec spec;
    spec.rows = spec.cols = 512;
    spec.water_fraction = 0.3;
    auto scene = generate_synthetic_scene(spec, 11);
    double water = 0;
    for (auto v : scene.mask->raw()) water += v;
    const double fraction = water / scene.mask->raw().size();
    CHECK(std::abs(fraction - 0.3) < 0.05);
  }

  SECTION("specification errors") {
    SynthSpec bad;
    bad.water_mean = 0.7;  // above land mean
    CHECK_THROWS(generate_synthetic_scene(bad, 0));
    SynthSpec bad2;
    bad2.looks = 0;
    CHECK_THROWS(generate_synthetic_scene(bad2, 0));
  }
}

TEST_CASE("tile persistence round trip") {
  TempDir tmp;
  SynthSpec spec;
  spec.rows = spec.cols = 64;
  auto scene = generate_synthetic_scene(spec, 21);
  auto tiles = tile_scene(scene, 32);
  auto split = split_dataset(tiles.size(), 0.5, 0.5, 1);

  save_tiles((tmp.path / "tiles").string(), tiles, split);
  auto loaded = load_tiles((tmp.path / "tiles").string());
  REQUIRE(loaded.tiles.size() == tiles.size());
  CHECK(loaded.split.train.size() == split.train.size());
  CHECK(loaded.split.validation.size() == split.validation.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    CHECK(loaded.tiles[i].row0 == tiles[i].row0);
    CHECK(loaded.tiles[i].col0 == tiles[i].col0);
    CHECK(loaded.tiles[i].scene_id == tiles[i].scene_id);
    REQUIRE(loaded.tiles[i].mask.has_value());
    CHECK(*loaded.tiles[i].mask == *tiles[i].mask);
    double diff = 0;
    for (std::size_t j = 0; j < tiles[i].pixels.raw().size(); ++j)
      diff = std::max(diff, std::abs(static_cast<double>(tiles[i].pixels.raw()[j]) -
                                     loaded.tiles[i].pixels.raw()[j]));
    CHECK(diff == 0.0);  // f32 payload survives exactly
  }
}
