#pragma once

#include <atomic>
#include <functional>
#include <thread>

#include "wetseg/config.hpp"
#include "wetseg/trainer.hpp"

namespace wetseg {

struct ResolvedData {
  std::vector<Tile> tiles;
  DatasetSplit split;
  GeoMetadata geo;
  std::string source;  // "tiles" | "scene" | "synthetic"
};

/// Materializes the dataset a config describes: a pre-tiled directory wins,
/// then a raw scene (split into train/val/test by the configured fractions),
/// otherwise the synthetic train + test scene pair.
inline ResolvedData resolve_dataset(const ExperimentConfig& cfg) {
  ResolvedData data;
  if (!cfg.tiles_dir.empty()) {
    auto loaded = load_tiles(cfg.tiles_dir);
    data.tiles = std::move(loaded.tiles);
    data.split = loaded.split;
    data.source = "tiles";
    return data;
  }
  if (!cfg.scene_path.empty()) {
    auto scene = load_scene(cfg.scene_path,
                            cfg.mask_path.empty() ? std::nullopt
                                                  : std::make_optional(cfg.mask_path),
                            cfg.scaling);
    data.geo = scene.geo;
    data.tiles = tile_scene(scene, cfg.tile_size);
    require(!data.tiles.empty(), "resolve_dataset: scene smaller than one tile");
    data.split = split_dataset(data.tiles.size(), cfg.train_fraction, cfg.val_fraction,
                               cfg.split_seed);
    data.source = "scene";
    return data;
  }
  // synthetic: train scene split into train/val, a held-out test scene
  auto train_scene =
      generate_synthetic_scene(cfg.synth_train, cfg.synth_train_seed, "synth-train");
  auto test_scene =
      generate_synthetic_scene(cfg.synth_test, cfg.synth_test_seed, "synth-test");
  data.tiles = tile_scene(train_scene, cfg.tile_size);
  require(!data.tiles.empty(), "resolve_dataset: synthetic scene smaller than one tile");
  const double tf = cfg.train_fraction, vf = cfg.val_fraction;
  data.split = split_dataset(data.tiles.size(), tf, vf >= 1.0 - tf ? 1.0 - tf : vf,
                             cfg.split_seed);
  auto test_tiles = tile_scene(test_scene, cfg.tile_size);
  for (auto& t : test_tiles) {
    data.split.test.push_back(data.tiles.size());
    data.tiles.push_back(std::move(t));
  }
  data.source = "synthetic";
  return data;
}

inline const std::vector<std::size_t>& subset_by_name(const DatasetSplit& split,
                                                      const std::string& name) {
  if (name == "test") return split.test;
  if (name == "validation") return split.validation;
  if (name == "train") return split.train;
  fail("unknown dataset subset: " + name);
}

inline void gather_labeled(const std::vector<Tile>& tiles,
                           const std::vector<std::size_t>& subset,
                           std::vector<ImageF>& pixels, std::vector<MaskImage>& masks) {
  pixels.clear();
  masks.clear();
  for (auto i : subset) {
    require(tiles[i].mask.has_value(), "subset tile lacks a ground-truth mask");
    pixels.push_back(tiles[i].pixels);
    masks.push_back(*tiles[i].mask);
  }
}

// ---------------------------------------------------------------------------
// One ensemble member: train, fit the class assignment on the designated
// subset, apply it on the test subset, score.
// ---------------------------------------------------------------------------

struct MemberEvaluation {
  double test_iou = 0;
  ClassAssignment assignment;
  std::vector<MaskImage> test_binary;  // per test tile, after the assignment
};

template <typename ModelLike>
MemberEvaluation evaluate_member(ModelLike& model, const std::vector<Tile>& tiles,
                                 const DatasetSplit& split, const std::string& fit_on,
                                 int eval_batch) {
  MemberEvaluation ev;
  std::vector<ImageF> fit_pixels, test_pixels;
  std::vector<MaskImage> fit_gt, test_gt;
  gather_labeled(tiles, subset_by_name(split, fit_on), fit_pixels, fit_gt);
  gather_labeled(tiles, split.test, test_pixels, test_gt);
  require(!test_gt.empty(), "evaluate_member: empty test subset");

  auto fit_classes = predict_class_masks(model.encoder, model.head, fit_pixels, eval_batch);
  ev.assignment = fit_assignment(fit_classes, fit_gt, model.num_classes);

  std::vector<MaskImage> test_classes =
      fit_on == "test" ? std::move(fit_classes)
                       : predict_class_masks(model.encoder, model.head, test_pixels,
                                             eval_batch);
  ev.test_binary.reserve(test_classes.size());
  for (const auto& m : test_classes)
    ev.test_binary.push_back(apply_assignment(m, ev.assignment));
  ev.test_iou = evaluate_dataset(ev.test_binary, test_gt, eval_batch).dataset_iou;
  return ev;
}

struct EnsembleRun {
  std::vector<double> member_ious;
  std::vector<double> member_val_ious;  // final-epoch validation IOU per member
  double ensemble_iou = 0;
  std::vector<MaskImage> ensemble_masks;
};

/// Trains all members in-process (up to `jobs` at a time; members are fully
/// independent) and majority-votes their post-assignment test predictions.
inline EnsembleRun run_ensemble(const std::vector<Tile>& tiles, const DatasetSplit& split,
                                const ExperimentConfig& cfg, int jobs = 1,
                                std::function<void(int, const SelfTrainOutcome&)>
                                    on_member_done = {}) {
  require(cfg.ensemble_members >= 1, "run_ensemble: need at least one member");
  require(static_cast<int>(cfg.ensemble_seeds.size()) >= cfg.ensemble_members,
          "run_ensemble: not enough member seeds");
  const int m = cfg.ensemble_members;

  std::vector<SelfTrainOutcome> outcomes(m);
  std::vector<MemberEvaluation> evals(m);

  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int k = next.fetch_add(1);
      if (k >= m) return;
      TrainConfig tc = cfg.train;
      tc.seed = cfg.ensemble_seeds[k];
      outcomes[k] = train_self_supervised(tiles, split, tc);
      evals[k] = evaluate_member(outcomes[k].model, tiles, split, cfg.fit_assignment_on,
                                 cfg.train.eval_batch_size);
    }
  };
  const int n_threads = std::max(1, std::min(jobs, m));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  EnsembleRun run;
  for (int k = 0; k < m; ++k) {
    run.member_ious.push_back(evals[k].test_iou);
    double vi = std::numeric_limits<double>::quiet_NaN();
    for (auto it = outcomes[k].log.epochs.rbegin(); it != outcomes[k].log.epochs.rend(); ++it)
      if (!std::isnan(it->val_iou)) {
        vi = it->val_iou;
        break;
      }
    run.member_val_ious.push_back(vi);
    if (on_member_done) on_member_done(k, outcomes[k]);
  }

  const std::size_t n_test = split.test.size();
  std::vector<MaskImage> gt;
  std::vector<ImageF> unused;
  gather_labeled(tiles, split.test, unused, gt);
  run.ensemble_masks.reserve(n_test);
  for (std::size_t t = 0; t < n_test; ++t) {
    std::vector<MaskImage> votes;
    votes.reserve(m);
    for (int k = 0; k < m; ++k) votes.push_back(evals[k].test_binary[t]);
    run.ensemble_masks.push_back(majority_vote(votes));
  }
  run.ensemble_iou =
      evaluate_dataset(run.ensemble_masks, gt, cfg.train.eval_batch_size).dataset_iou;
  return run;
}

}  // namespace wetseg
