#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wetseg/otsu.hpp"
#include "wetseg/synthetic.hpp"
#include "wetseg/trainer.hpp"

namespace wetseg {

/// Every knob of a run in one serializable record. Defaults reproduce the
/// full-scale protocol (depth 2, 8 channels, 10 classes, batch 16, 100
/// epochs, 5-member ensembles); profiles override via JSON.
struct ExperimentConfig {
  // data sources: a pre-tiled directory takes precedence, then a raw scene,
  // otherwise the synthetic generator below
  std::string tiles_dir;
  std::string scene_path;
  std::string mask_path;
  ScalingSpec scaling;

  SynthSpec synth_train;
  SynthSpec synth_test;
  std::uint64_t synth_train_seed = 101;
  std::uint64_t synth_test_seed = 202;

  int tile_size = 512;
  double train_fraction = 0.8;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;

  TrainConfig train;           // model, losses, optimizer, schedule, augment
  double supervised_fraction = 1.0;

  OtsuConfig otsu;

  int ensemble_members = 5;
  std::vector<std::uint64_t> ensemble_seeds = {1, 2, 3, 4, 5};
  std::string fit_assignment_on = "test";  // test | validation | train

  std::string output_dir = "runs/out";
};

namespace detail {

inline nlohmann::json synth_to_json(const SynthSpec& s) {
  return {{"rows", s.rows},
          {"cols", s.cols},
          {"water_fraction", s.water_fraction},
          {"blob_scale", s.blob_scale},
          {"land_mean", s.land_mean},
          {"water_mean", s.water_mean},
          {"looks", s.looks}};
}

inline SynthSpec synth_from_json(const nlohmann::json& j, SynthSpec base) {
  base.rows = j.value("rows", base.rows);
  base.cols = j.value("cols", base.cols);
  base.water_fraction = j.value("water_fraction", base.water_fraction);
  base.blob_scale = j.value("blob_scale", base.blob_scale);
  base.land_mean = j.value("land_mean", base.land_mean);
  base.water_mean = j.value("water_mean", base.water_mean);
  base.looks = j.value("looks", base.looks);
  return base;
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"data",
       {{"tiles", c.tiles_dir},
        {"scene", c.scene_path},
        {"mask", c.mask_path},
        {"scaling",
         {{"mode", c.scaling.mode == ScalingSpec::Mode::MinMax ? "minmax" : "fixed"},
          {"low", c.scaling.low},
          {"high", c.scaling.high}}}}},
      {"synthetic",
       {{"train", detail::synth_to_json(c.synth_train)},
        {"test", detail::synth_to_json(c.synth_test)},
        {"train_seed", c.synth_train_seed},
        {"test_seed", c.synth_test_seed}}},
      {"tile", {{"size", c.tile_size}}},
      {"split",
       {{"train", c.train_fraction}, {"val", c.val_fraction}, {"seed", c.split_seed}}},
      {"model",
       {{"depth", c.train.model.depth},
        {"base_channels", c.train.model.base_channels},
        {"expansive_convs", c.train.model.expansive_convs}}},
      {"num_classes", c.train.num_classes},
      {"loss",
       {{"clustering_weight", c.train.loss.clustering},
        {"positive_weight", c.train.loss.positive},
        {"negative_weight", c.train.loss.negative},
        {"class_smoothing", c.train.loss.class_smoothing},
        {"weighted_clustering", c.train.loss.weighted_clustering}}},
      {"optimizer",
       {{"lr", c.train.optimizer.lr},
        {"beta1", c.train.optimizer.beta1},
        {"beta2", c.train.optimizer.beta2},
        {"eps", c.train.optimizer.eps},
        {"weight_decay", c.train.optimizer.weight_decay}}},
      {"schedule",
       {{"eta_min", c.train.schedule.eta_min},
        {"t0", c.train.schedule.t0},
        {"t_mult", c.train.schedule.t_mult},
        {"step", c.train.schedule.per_epoch ? "epoch" : "batch"}}},
      {"augment",
       {{"sigma_low", c.train.augment.sigma_low},
        {"sigma_high", c.train.augment.sigma_high},
        {"blur_kernel", c.train.augment.blur_kernel},
        {"flip_prob", c.train.augment.flip_prob},
        {"shared_flips", c.train.augment.shared_flips}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"eval_batch_size", c.train.eval_batch_size},
        {"seed", c.train.seed}}},
      {"supervised", {{"fraction", c.supervised_fraction}}},
      {"otsu",
       {{"blur_kernel", c.otsu.blur_kernel},
        {"blur_sigma", c.otsu.blur_sigma},
        {"morph_kernel", c.otsu.morph_kernel},
        {"morph_iterations", c.otsu.morph_iterations},
        {"histogram_bins", c.otsu.histogram_bins},
        {"batched_iterations", c.otsu.batched_morph_iterations}}},
      {"ensemble",
       {{"members", c.ensemble_members},
        {"seeds", c.ensemble_seeds},
        {"fit_on", c.fit_assignment_on}}},
      {"output", {{"dir", c.output_dir}}}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.tiles_dir = d.value("tiles", c.tiles_dir);
    c.scene_path = d.value("scene", c.scene_path);
    c.mask_path = d.value("mask", c.mask_path);
    if (d.contains("scaling")) {
      const auto& s = d["scaling"];
      c.scaling.mode = s.value("mode", "fixed") == std::string("minmax")
                           ? ScalingSpec::Mode::MinMax
                           : ScalingSpec::Mode::FixedRange;
      c.scaling.low = s.value("low", c.scaling.low);
      c.scaling.high = s.value("high", c.scaling.high);
    }
  }
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    if (s.contains("train")) c.synth_train = detail::synth_from_json(s["train"], c.synth_train);
    if (s.contains("test")) c.synth_test = detail::synth_from_json(s["test"], c.synth_test);
    c.synth_train_seed = s.value("train_seed", c.synth_train_seed);
    c.synth_test_seed = s.value("test_seed", c.synth_test_seed);
  }
  if (j.contains("tile")) c.tile_size = j["tile"].value("size", c.tile_size);
  if (j.contains("split")) {
    c.train_fraction = j["split"].value("train", c.train_fraction);
    c.val_fraction = j["split"].value("val", c.val_fraction);
    c.split_seed = j["split"].value("seed", c.split_seed);
  }
  if (j.contains("model")) {
    c.train.model.depth = j["model"].value("depth", c.train.model.depth);
    c.train.model.base_channels =
        j["model"].value("base_channels", c.train.model.base_channels);
    c.train.model.expansive_convs =
        j["model"].value("expansive_convs", c.train.model.expansive_convs);
  }
  c.train.num_classes = j.value("num_classes", c.train.num_classes);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    c.train.loss.clustering = l.value("clustering_weight", c.train.loss.clustering);
    c.train.loss.positive = l.value("positive_weight", c.train.loss.positive);
    c.train.loss.negative = l.value("negative_weight", c.train.loss.negative);
    c.train.loss.class_smoothing = l.value("class_smoothing", c.train.loss.class_smoothing);
    c.train.loss.weighted_clustering =
        l.value("weighted_clustering", c.train.loss.weighted_clustering);
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    c.train.optimizer.lr = o.value("lr", c.train.optimizer.lr);
    c.train.optimizer.beta1 = o.value("beta1", c.train.optimizer.beta1);
    c.train.optimizer.beta2 = o.value("beta2", c.train.optimizer.beta2);
    c.train.optimizer.eps = o.value("eps", c.train.optimizer.eps);
    c.train.optimizer.weight_decay = o.value("weight_decay", c.train.optimizer.weight_decay);
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    c.train.schedule.eta_min = s.value("eta_min", c.train.schedule.eta_min);
    c.train.schedule.t0 = s.value("t0", c.train.schedule.t0);
    c.train.schedule.t_mult = s.value("t_mult", c.train.schedule.t_mult);
    c.train.schedule.per_epoch = s.value("step", "batch") == std::string("epoch");
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    c.train.augment.sigma_low = a.value("sigma_low", c.train.augment.sigma_low);
    c.train.augment.sigma_high = a.value("sigma_high", c.train.augment.sigma_high);
    c.train.augment.blur_kernel = a.value("blur_kernel", c.train.augment.blur_kernel);
    c.train.augment.flip_prob = a.value("flip_prob", c.train.augment.flip_prob);
    c.train.augment.shared_flips = a.value("shared_flips", c.train.augment.shared_flips);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.eval_batch_size = t.value("eval_batch_size", c.train.eval_batch_size);
    c.train.seed = t.value("seed", c.train.seed);
  }
  if (j.contains("supervised"))
    c.supervised_fraction = j["supervised"].value("fraction", c.supervised_fraction);
  if (j.contains("otsu")) {
    const auto& o = j["otsu"];
    c.otsu.blur_kernel = o.value("blur_kernel", c.otsu.blur_kernel);
    c.otsu.blur_sigma = o.value("blur_sigma", c.otsu.blur_sigma);
    c.otsu.morph_kernel = o.value("morph_kernel", c.otsu.morph_kernel);
    c.otsu.morph_iterations = o.value("morph_iterations", c.otsu.morph_iterations);
    c.otsu.histogram_bins = o.value("histogram_bins", c.otsu.histogram_bins);
    c.otsu.batched_morph_iterations =
        o.value("batched_iterations", c.otsu.batched_morph_iterations);
  }
  if (j.contains("ensemble")) {
    const auto& e = j["ensemble"];
    c.ensemble_members = e.value("members", c.ensemble_members);
    if (e.contains("seeds")) c.ensemble_seeds = e["seeds"].get<std::vector<std::uint64_t>>();
    c.fit_assignment_on = e.value("fit_on", c.fit_assignment_on);
  }
  if (j.contains("output")) c.output_dir = j["output"].value("dir", c.output_dir);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("config: cannot read " + path);
  nlohmann::json j;
  f >> j;
  return config_from_json(j);
}

inline void write_config_snapshot(const ExperimentConfig& c, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / "config.json");
  f << to_json(c).dump(2) << '\n';
}

inline int parallel_jobs(int fallback = 2) {
  if (const char* jobs = std::getenv("WETSEG_JOBS")) {
    const int j = std::atoi(jobs);
    if (j >= 1) return j;
  }
  return fallback;
}

}  // namespace wetseg
