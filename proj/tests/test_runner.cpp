#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "wetseg/report.hpp"
#include "wetseg/runner.hpp"

using namespace wetseg;
namespace fs = std::filesystem;

namespace {

ExperimentConfig mini_config() {
  ExperimentConfig cfg;
  cfg.synth_train = SynthSpec{128, 128, 0.35, 10.0, 0.55, 0.15, 4.0};
  cfg.synth_test = SynthSpec{64, 64, 0.35, 10.0, 0.55, 0.15, 4.0};
  cfg.synth_train_seed = 61;
  cfg.synth_test_seed = 62;
  cfg.tile_size = 32;
  cfg.split_seed = 9;
  cfg.train.model = nn::UNetConfig{.depth = 2, .base_channels = 4};
  cfg.train.num_classes = 6;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 4;
  cfg.train.eval_batch_size = 8;
  return cfg;
}

}  // namespace

TEST_CASE("dataset resolution from the synthetic generator") {
  auto cfg = mini_config();
  auto data = resolve_dataset(cfg);
  CHECK(data.source == "synthetic");
  CHECK(data.tiles.size() == 16 + 4);  // 128^2 and 64^2 at tile 32
  CHECK(data.split.test.size() == 4);
  CHECK(data.split.train.size() + data.split.validation.size() == 16);
  // held-out tiles come from the test scene
  for (auto i : data.split.test) CHECK(data.tiles[i].scene_id == "synth-test");
  // deterministic: resolving twice gives the same pixels
  auto again = resolve_dataset(cfg);
  CHECK(again.tiles[0].pixels == data.tiles[0].pixels);
}

TEST_CASE("ensemble with identical member seeds collapses to one member") {
  auto cfg = mini_config();
  cfg.ensemble_members = 2;
  cfg.ensemble_seeds = {17, 17};
  auto data = resolve_dataset(cfg);
  auto run = run_ensemble(data.tiles, data.split, cfg, /*jobs=*/2);
  REQUIRE(run.member_ious.size() == 2);
  CHECK(run.member_ious[0] == run.member_ious[1]);
  CHECK(run.ensemble_iou == run.member_ious[0]);
}

TEST_CASE("single-member ensemble equals that member") {
  auto cfg = mini_config();
  cfg.ensemble_members = 1;
  cfg.ensemble_seeds = {23};
  auto data = resolve_dataset(cfg);
  auto run = run_ensemble(data.tiles, data.split, cfg);
  CHECK(run.ensemble_iou == run.member_ious[0]);
}

TEST_CASE("experiment config survives a json round trip") {
  auto cfg = mini_config();
  cfg.train.loss.weighted_clustering = false;
  cfg.train.schedule.per_epoch = true;
  cfg.scaling = ScalingSpec::minmax();
  cfg.ensemble_seeds = {4, 5, 6};
  cfg.fit_assignment_on = "validation";

  auto j = to_json(cfg);
  auto back = config_from_json(j);
  CHECK(back.tile_size == cfg.tile_size);
  CHECK(back.train.num_classes == cfg.train.num_classes);
  CHECK(back.train.loss.weighted_clustering == false);
  CHECK(back.train.schedule.per_epoch == true);
  CHECK(back.scaling.mode == ScalingSpec::Mode::MinMax);
  CHECK(back.ensemble_seeds == cfg.ensemble_seeds);
  CHECK(back.fit_assignment_on == "validation");
  CHECK(back.synth_train.water_fraction == cfg.synth_train.water_fraction);
  CHECK(to_json(back) == j);  // fixed point
}

TEST_CASE("metrics logs parse back into curves") {
  auto cfg = mini_config();
  auto data = resolve_dataset(cfg);
  const auto dir = fs::temp_directory_path() / "wetseg_runner_log";
  fs::create_directories(dir);
  {
    std::ofstream log(dir / "metrics.jsonl");
    train_self_supervised(data.tiles, data.split, cfg.train, &log);
  }
  auto parsed = parse_metrics_log((dir / "metrics.jsonl").string(), "run");
  CHECK(parsed.step_loss.size() == 2 * 3);  // 2 epochs x 3 batches of 4 (12 train tiles)
  CHECK(parsed.epoch_val_iou.size() == 2);
  const auto occupancy = distinct_classes_per_epoch(parsed);
  REQUIRE(occupancy.size() == 2);
  for (double v : occupancy) {
    CHECK(v >= 1.0);
    CHECK(v <= cfg.train.num_classes);
  }
  fs::remove_all(dir);
}
