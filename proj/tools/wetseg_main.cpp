// wetseg: self-supervised water/land segmentation of radar scenes.
//
// Commands: synth, tile, train, train-supervised, infer, evaluate, otsu,
// ensemble, ablation, report. Every command takes --config (JSON) and a few
// direct flags that override single keys; the merged effective config is
// written next to the outputs.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <map>
#include <fstream>
#include <iostream>

#include "wetseg/report.hpp"
#include "wetseg/runner.hpp"

namespace fs = std::filesystem;
using namespace wetseg;

namespace {

std::string self_exe() {
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  require(n > 0, "cannot resolve own executable path");
  buf[n] = '\0';
  return buf;
}

// Runs child processes (argv lists), at most `jobs` at a time. Returns false
// on the first failure after draining the running children.
bool run_processes(const std::vector<std::vector<std::string>>& commands, int jobs) {
  std::vector<pid_t> running;
  bool ok = true;
  auto reap_one = [&]() {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    running.erase(std::remove(running.begin(), running.end(), pid), running.end());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ok = false;
  };
  for (const auto& cmd : commands) {
    while (static_cast<int>(running.size()) >= jobs) reap_one();
    if (!ok) break;
    const pid_t pid = fork();
    require(pid >= 0, "fork failed");
    if (pid == 0) {
      std::vector<char*> argv;
      for (const auto& a : cmd) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execv(argv[0], argv.data());
      _exit(127);
    }
    running.push_back(pid);
  }
  while (!running.empty()) reap_one();
  return ok;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) fail("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  auto train_scene =
      generate_synthetic_scene(cfg.synth_train, cfg.synth_train_seed, "synth-train");
  auto test_scene =
      generate_synthetic_scene(cfg.synth_test, cfg.synth_test_seed, "synth-test");
  const fs::path out(cfg.output_dir);
  write_geotiff((out / "train.tif").string(), train_scene.pixels);
  write_geotiff((out / "train_mask.tif").string(), *train_scene.mask);
  write_geotiff((out / "test.tif").string(), test_scene.pixels);
  write_geotiff((out / "test_mask.tif").string(), *test_scene.mask);
  write_config_snapshot(cfg, cfg.output_dir);
  std::cout << "synth: wrote train/test scenes to " << cfg.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tile
// ---------------------------------------------------------------------------

int cmd_tile(const ExperimentConfig& cfg) {
  require(!cfg.scene_path.empty(), "tile: --scene is required");
  auto scene = load_scene(cfg.scene_path,
                          cfg.mask_path.empty() ? std::nullopt
                                                : std::make_optional(cfg.mask_path),
                          cfg.scaling);
  auto tiles = tile_scene(scene, cfg.tile_size);
  require(!tiles.empty(), "tile: scene smaller than one tile");
  auto split =
      split_dataset(tiles.size(), cfg.train_fraction, cfg.val_fraction, cfg.split_seed);
  save_tiles(cfg.output_dir, tiles, split, scene.geo);
  write_config_snapshot(cfg, cfg.output_dir);
  std::cout << "tile: wrote " << tiles.size() << " tiles (" << split.train.size()
            << " train, " << split.validation.size() << " val, " << split.test.size()
            << " test) to " << cfg.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train (self-supervised)
// ---------------------------------------------------------------------------

nlohmann::json member_summary(const SelfTrainOutcome& out, double test_iou) {
  nlohmann::json j{{"kind", "self_supervised"},
                   {"seed", out.model.init_seed},
                   {"trained_epochs", out.model.trained_epochs},
                   {"best_epoch", out.best_epoch}};
  if (out.best_epoch >= 0) j["best_val_iou"] = out.best_val_iou;
  for (auto it = out.log.epochs.rbegin(); it != out.log.epochs.rend(); ++it)
    if (!std::isnan(it->val_iou)) {
      j["final_val_iou"] = it->val_iou;
      break;
    }
  if (!std::isnan(test_iou)) j["test_iou"] = test_iou;
  return j;
}

int cmd_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);
  auto data = resolve_dataset(cfg);
  const fs::path out(cfg.output_dir);

  std::ofstream log_file(out / "metrics.jsonl");
  auto outcome = train_self_supervised(data.tiles, data.split, cfg.train, &log_file);
  log_file.close();

  nn::CheckpointMeta meta;
  meta.model = cfg.train.model;
  meta.num_classes = cfg.train.num_classes;
  meta.init_seed = cfg.train.seed;
  meta.trained_epochs = outcome.model.trained_epochs;
  nn::save_checkpoint((out / "checkpoint.ckpt").string(), outcome.model.encoder,
                      outcome.model.head, meta);
  if (outcome.best_model) {
    meta.trained_epochs = outcome.best_model->trained_epochs;
    nn::save_checkpoint((out / "checkpoint_best.ckpt").string(),
                        outcome.best_model->encoder, outcome.best_model->head, meta);
  }

  double test_iou = std::numeric_limits<double>::quiet_NaN();
  const auto& fit_set = subset_by_name(data.split, cfg.fit_assignment_on);
  const bool can_eval = !data.split.test.empty() && !fit_set.empty() &&
                        data.tiles[data.split.test.front()].mask.has_value();
  if (can_eval && cfg.train.epochs > 0) {
    auto ev = evaluate_member(outcome.model, data.tiles, data.split,
                              cfg.fit_assignment_on, cfg.train.eval_batch_size);
    test_iou = ev.test_iou;
    save_assignment((out / "assignment.txt").string(), ev.assignment, "checkpoint.ckpt",
                    cfg.fit_assignment_on);
  }
  write_json(out / "summary.json", member_summary(outcome, test_iou));
  std::cout << "train: done; ";
  if (!std::isnan(test_iou)) std::cout << "test IOU " << test_iou << "; ";
  std::cout << "artifacts in " << cfg.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-supervised
// ---------------------------------------------------------------------------

int cmd_train_supervised(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);
  auto data = resolve_dataset(cfg);
  const fs::path out(cfg.output_dir);

  std::ofstream log_file(out / "metrics.jsonl");
  auto outcome = train_supervised(data.tiles, data.split, cfg.supervised_fraction,
                                  cfg.train, &log_file);
  log_file.close();

  nn::CheckpointMeta meta;
  meta.model = cfg.train.model;
  meta.init_seed = cfg.train.seed;
  meta.trained_epochs = outcome.trained_epochs;
  nn::save_checkpoint((out / "checkpoint.ckpt").string(), outcome.model, meta);

  nlohmann::json summary{{"kind", "supervised"},
                         {"seed", cfg.train.seed},
                         {"fraction", cfg.supervised_fraction},
                         {"tiles_used", outcome.used_tiles.size()},
                         {"trained_epochs", outcome.trained_epochs}};
  if (!data.split.test.empty() && data.tiles[data.split.test.front()].mask &&
      cfg.train.epochs > 0) {
    std::vector<ImageF> pixels;
    std::vector<MaskImage> gt;
    gather_labeled(data.tiles, data.split.test, pixels, gt);
    auto pred = predict_binary_masks(outcome.model, pixels, cfg.train.eval_batch_size);
    summary["test_iou"] =
        evaluate_dataset(pred, gt, cfg.train.eval_batch_size).dataset_iou;
  }
  write_json(out / "summary.json", summary);
  std::cout << "train-supervised: done; artifacts in " << cfg.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

int cmd_infer(const std::string& checkpoint, const std::string& scene_path,
              const std::string& assignment_path, const std::string& out_path,
              const ExperimentConfig& cfg) {
  auto scene = load_scene(scene_path, std::nullopt, cfg.scaling);
  const auto meta = nn::peek_checkpoint(checkpoint);
  MaskImage result;
  if (meta.kind == "self_supervised") {
    auto model = nn::load_self_supervised_checkpoint(checkpoint);
    result = infer_scene(model.encoder, model.head, scene, cfg.tile_size,
                         cfg.train.eval_batch_size);
    if (!assignment_path.empty())
      result = apply_assignment(result, load_assignment(assignment_path));
  } else {
    auto model = nn::load_supervised_checkpoint(checkpoint);
    auto tiles = tile_scene(scene, cfg.tile_size);
    require(!tiles.empty(), "infer: scene smaller than one tile");
    std::vector<ImageF> pixels;
    for (const auto& t : tiles) pixels.push_back(t.pixels);
    auto masks = predict_binary_masks(model.model, pixels, cfg.train.eval_batch_size);
    result = MaskImage((scene.rows() / cfg.tile_size) * cfg.tile_size,
                       (scene.cols() / cfg.tile_size) * cfg.tile_size);
    for (std::size_t i = 0; i < tiles.size(); ++i)
      result.paste(masks[i], tiles[i].row0, tiles[i].col0);
  }
  if (!out_path.empty()) {
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    write_geotiff(out_path, result, scene.geo);
  }
  std::cout << "infer: wrote " << out_path << " (" << result.rows() << "x"
            << result.cols() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const std::string& checkpoint, const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);
  auto data = resolve_dataset(cfg);
  const fs::path out(cfg.output_dir);

  const auto meta = nn::peek_checkpoint(checkpoint);
  EvalReport report;
  nlohmann::json extra;
  if (meta.kind == "self_supervised") {
    auto model = nn::load_self_supervised_checkpoint(checkpoint);
    struct Wrapper {
      nn::UNetEncoder<float>& encoder;
      nn::PredictionHead<float>& head;
      int num_classes;
    } wrapper{model.encoder, model.head, model.meta.num_classes};
    auto ev = evaluate_member(wrapper, data.tiles, data.split, cfg.fit_assignment_on,
                              cfg.train.eval_batch_size);
    std::vector<ImageF> pixels;
    std::vector<MaskImage> gt;
    gather_labeled(data.tiles, data.split.test, pixels, gt);
    report = evaluate_dataset(ev.test_binary, gt, cfg.train.eval_batch_size);
    save_assignment((out / "assignment.txt").string(), ev.assignment, checkpoint,
                    cfg.fit_assignment_on);
    extra["fit_on"] = cfg.fit_assignment_on;
  } else {
    auto model = nn::load_supervised_checkpoint(checkpoint);
    std::vector<ImageF> pixels;
    std::vector<MaskImage> gt;
    gather_labeled(data.tiles, data.split.test, pixels, gt);
    auto pred = predict_binary_masks(model.model, pixels, cfg.train.eval_batch_size);
    report = evaluate_dataset(pred, gt, cfg.train.eval_batch_size);
  }

  nlohmann::json j{{"dataset_iou", report.dataset_iou},
                   {"global_iou", report.global_iou},
                   {"n_batches", report.n_batches},
                   {"epsilon", report.epsilon},
                   {"per_batch_iou", report.per_batch_iou}};
  j.update(extra);
  write_json(out / "eval.json", j);
  std::cout << "evaluate: dataset IOU " << report.dataset_iou << " over "
            << report.n_batches << " batches (global " << report.global_iou << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// otsu
// ---------------------------------------------------------------------------

int cmd_otsu(const ExperimentConfig& cfg, bool use_pre, bool use_post, bool table) {
  fs::create_directories(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);
  const fs::path out(cfg.output_dir);

  Scene scene;
  std::optional<MaskImage> gt;
  if (!cfg.scene_path.empty()) {
    scene = load_scene(cfg.scene_path,
                       cfg.mask_path.empty() ? std::nullopt
                                             : std::make_optional(cfg.mask_path),
                       cfg.scaling);
    gt = scene.mask;
  } else {
    scene = generate_synthetic_scene(cfg.synth_test, cfg.synth_test_seed, "synth-test");
    gt = scene.mask;
  }

  auto run_one = [&](bool pre, bool post) {
    auto mask = otsu_segment(scene, cfg.otsu, pre, post);
    nlohmann::json row{{"pre", pre}, {"post", post}};
    if (gt) row["iou"] = iou(mask, *gt);
    return std::pair(mask, row);
  };

  nlohmann::json rows = nlohmann::json::array();
  if (table) {
    for (auto [pre, post] :
         {std::pair{false, false}, std::pair{true, false}, std::pair{true, true}}) {
      auto [mask, row] = run_one(pre, post);
      rows.push_back(row);
      std::cout << "otsu" << (pre ? " +pre" : "") << (post ? " +post" : "");
      if (row.contains("iou")) std::cout << ": IOU " << row["iou"].get<double>();
      std::cout << "\n";
    }
    write_geotiff((out / "otsu_pred.tif").string(), run_one(use_pre, use_post).first,
                  scene.geo);
  } else {
    auto [mask, row] = run_one(use_pre, use_post);
    rows.push_back(row);
    write_geotiff((out / "otsu_pred.tif").string(), mask, scene.geo);
    if (row.contains("iou")) std::cout << "otsu: IOU " << row["iou"].get<double>() << "\n";
  }
  write_json(out / "otsu.json", {{"rows", rows},
                                 {"threshold_bins", cfg.otsu.histogram_bins},
                                 {"scene", scene.scene_id}});
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble: member training in separate OS processes, then vote and score.
// ---------------------------------------------------------------------------

int cmd_ensemble(const ExperimentConfig& cfg) {
  require(cfg.ensemble_members >= 1, "ensemble: need at least one member");
  require(static_cast<int>(cfg.ensemble_seeds.size()) >= cfg.ensemble_members,
          "ensemble: not enough seeds for the requested member count");
  fs::create_directories(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);
  const fs::path out(cfg.output_dir);

  std::vector<std::vector<std::string>> commands;
  for (int k = 0; k < cfg.ensemble_members; ++k) {
    ExperimentConfig member = cfg;
    member.train.seed = cfg.ensemble_seeds[k];
    member.output_dir = (out / ("member_" + std::to_string(k))).string();
    fs::create_directories(member.output_dir);
    const auto cfg_path = out / ("member_" + std::to_string(k) + ".json");
    write_json(cfg_path, to_json(member));
    commands.push_back({self_exe(), "train", "--config", cfg_path.string(), "--out",
                        member.output_dir});
  }
  if (!run_processes(commands, parallel_jobs())) {
    std::cerr << "ensemble: a member failed; partial logs remain in " << cfg.output_dir
              << "\n";
    return 1;
  }

  auto data = resolve_dataset(cfg);
  std::vector<ImageF> test_pixels;
  std::vector<MaskImage> test_gt;
  gather_labeled(data.tiles, data.split.test, test_pixels, test_gt);

  std::vector<double> member_ious;
  std::vector<std::vector<MaskImage>> member_masks;
  for (int k = 0; k < cfg.ensemble_members; ++k) {
    const auto dir = out / ("member_" + std::to_string(k));
    auto model = nn::load_self_supervised_checkpoint((dir / "checkpoint.ckpt").string());
    struct Wrapper {
      nn::UNetEncoder<float>& encoder;
      nn::PredictionHead<float>& head;
      int num_classes;
    } wrapper{model.encoder, model.head, model.meta.num_classes};
    auto ev = evaluate_member(wrapper, data.tiles, data.split, cfg.fit_assignment_on,
                              cfg.train.eval_batch_size);
    member_ious.push_back(ev.test_iou);
    member_masks.push_back(std::move(ev.test_binary));
  }

  std::vector<MaskImage> voted;
  for (std::size_t t = 0; t < test_gt.size(); ++t) {
    std::vector<MaskImage> votes;
    for (const auto& mm : member_masks) votes.push_back(mm[t]);
    voted.push_back(majority_vote(votes));
  }
  const double ensemble_iou =
      evaluate_dataset(voted, test_gt, cfg.train.eval_batch_size).dataset_iou;

  // persist the voted prediction as {0,1} rasters, reassembled per scene
  {
    std::map<std::string, std::pair<int, int>> extent;
    for (std::size_t t = 0; t < voted.size(); ++t) {
      const Tile& tile = data.tiles[data.split.test[t]];
      auto& e = extent[tile.scene_id];
      e.first = std::max(e.first, tile.row0 + tile.size());
      e.second = std::max(e.second, tile.col0 + tile.size());
    }
    std::map<std::string, MaskImage> assembled;
    for (const auto& [scene_id, e] : extent)
      assembled.emplace(scene_id, MaskImage(e.first, e.second, 0));
    for (std::size_t t = 0; t < voted.size(); ++t) {
      const Tile& tile = data.tiles[data.split.test[t]];
      assembled.at(tile.scene_id).paste(voted[t], tile.row0, tile.col0);
    }
    for (const auto& [scene_id, mask] : assembled)
      write_geotiff((out / ("ensemble_" + scene_id + ".tif")).string(), mask, data.geo);
  }

  const auto stats = aggregate_runs(member_ious);
  nlohmann::json j{{"members", cfg.ensemble_members},
                   {"seeds", cfg.ensemble_seeds},
                   {"fit_on", cfg.fit_assignment_on},
                   {"member_test_iou", member_ious},
                   {"member_mean", stats.mean},
                   {"member_variance", stats.variance},
                   {"ensemble_test_iou", ensemble_iou}};
  write_json(out / "ensemble.json", j);

  std::vector<TableRow> table{{"single (members)", member_ious},
                              {"ensemble", {ensemble_iou}}};
  std::ofstream table_file(out / "table.txt");
  table_file << render_mean_var_table("ensemble vs single members", table);

  std::cout << "ensemble: member IOUs ";
  for (double v : member_ious) std::cout << v << " ";
  std::cout << "-> ensemble IOU " << ensemble_iou << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis,
                            const std::string& value) {
  if (axis == "clustering_loss_type") {
    if (value == "uniform")
      cfg.train.loss.weighted_clustering = false;
    else if (value == "weighted")
      cfg.train.loss.weighted_clustering = true;
    else
      fail("ablation: clustering_loss_type must be uniform|weighted");
  } else if (axis == "n_class") {
    cfg.train.num_classes = std::stoi(value);
  } else if (axis == "batch_size") {
    cfg.train.batch_size = std::stoi(value);
  } else if (axis == "channels") {
    cfg.train.model.base_channels = std::stoi(value);
  } else if (axis == "depth") {
    cfg.train.model.depth = std::stoi(value);
  } else {
    fail("ablation: unknown axis " + axis);
  }
  return cfg;
}

int cmd_ablation(const ExperimentConfig& cfg, const std::string& axis,
                 const std::vector<std::string>& values, int repeats) {
  require(repeats >= 1, "ablation: repeats must be >= 1");
  require(!values.empty(), "ablation: no axis values given");
  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  write_config_snapshot(cfg, cfg.output_dir);

  std::vector<TableRow> rows;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& value : values) {
    auto cell_cfg = apply_axis(cfg, axis, value);
    TableRow row;
    row.label = axis + "=" + value;
    for (int r = 0; r < repeats; ++r) {
      cell_cfg.train.seed = cfg.train.seed + static_cast<std::uint64_t>(r);
      auto data = resolve_dataset(cell_cfg);
      auto outcome = train_self_supervised(data.tiles, data.split, cell_cfg.train);
      auto ev = evaluate_member(outcome.model, data.tiles, data.split,
                                cell_cfg.fit_assignment_on,
                                cell_cfg.train.eval_batch_size);
      row.values.push_back(ev.test_iou);
      cells.push_back({{"axis", axis},
                       {"value", value},
                       {"repeat", r},
                       {"seed", cell_cfg.train.seed},
                       {"test_iou", ev.test_iou}});
      std::cout << row.label << " repeat " << r << ": test IOU " << ev.test_iou << "\n";
    }
    rows.push_back(std::move(row));
  }

  std::ofstream table_file(out / "ablation.txt");
  table_file << render_mean_var_table("ablation over " + axis, rows);
  write_json(out / "ablation.json", {{"axis", axis}, {"repeats", repeats}, {"cells", cells}});
  std::cout << render_mean_var_table("ablation over " + axis, rows);
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  require(!run_dirs.empty(), "report: no run directories given");
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  std::vector<RunLog> logs;
  std::vector<TableRow> rows;
  for (const auto& dir : run_dirs) {
    logs.push_back(parse_metrics_log((fs::path(dir) / "metrics.jsonl").string(),
                                     fs::path(dir).filename().string()));
    const auto summary_path = fs::path(dir) / "summary.json";
    if (fs::exists(summary_path)) {
      std::ifstream f(summary_path);
      nlohmann::json j;
      f >> j;
      if (j.contains("test_iou"))
        rows.push_back({logs.back().name, {j["test_iou"].get<double>()}});
    }
  }

  render_val_iou_curves(logs, (out / "val_iou_curves.png").string());
  render_loss_curves(logs, (out / "loss_curves.png").string());
  render_class_occupancy_curves(logs, (out / "class_occupancy.png").string());

  std::ofstream legend(out / "legend.txt");
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& c = series_palette()[i % series_palette().size()];
    legend << logs[i].name << "\trgb(" << int(c.r) << "," << int(c.g) << "," << int(c.b)
           << ")\n";
  }

  std::ofstream table_file(out / "summary_table.txt");
  if (!rows.empty()) table_file << render_mean_var_table("test IOU per run", rows);
  for (const auto& log : logs) {
    double final_val = std::numeric_limits<double>::quiet_NaN();
    for (auto it = log.epoch_val_iou.rbegin(); it != log.epoch_val_iou.rend(); ++it)
      if (!std::isnan(*it)) {
        final_val = *it;
        break;
      }
    table_file << log.name << "\tfinal val IOU\t" << final_val << "\n";
  }
  std::cout << "report: wrote curves and tables for " << logs.size() << " runs to "
            << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised water/land segmentation of radar scenes"};
  app.require_subcommand(1);

  std::string config_path, out_dir, scene, mask, checkpoint, assignment, out_file;
  std::string axis, fit_on;
  std::vector<std::string> values, run_dirs, set_overrides;
  int repeats = 1;
  std::uint64_t seed = 0;
  int epochs = -1, batch_size = -1, num_classes = -1, tile_size = -1, members = -1;
  double fraction = -1.0;
  bool no_pre = false, no_post = false, table = false, uniform_loss = false;
  std::string sched_step;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--set", set_overrides,
                    "override one config key, e.g. --set optimizer.lr=0.002 "
                    "(repeatable; dotted path into the config document)");
  };
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-size", batch_size, "batch size");
    cmd->add_option("--num-classes", num_classes, "model classes");
    cmd->add_option("--tile-size", tile_size, "tile side length");
    cmd->add_option("--fit-on", fit_on, "assignment fitting subset: test|validation|train");
    cmd->add_flag("--uniform-loss", uniform_loss,
                  "plain cross-entropy instead of the class-balanced variant");
    cmd->add_option("--sched-step", sched_step, "scheduler stepping: batch|epoch");
  };

  auto* c_synth = app.add_subcommand("synth", "generate synthetic speckled scenes");
  add_common(c_synth);

  auto* c_tile = app.add_subcommand("tile", "cut a scene into tiles with a manifest");
  add_common(c_tile);
  c_tile->add_option("--scene", scene, "input raster")->required();
  c_tile->add_option("--mask", mask, "ground-truth raster");
  c_tile->add_option("--tile-size", tile_size, "tile side length");

  auto* c_train = app.add_subcommand("train", "train one self-supervised model");
  add_common(c_train);
  add_train_flags(c_train);

  auto* c_sup = app.add_subcommand("train-supervised", "train the Dice-loss baseline");
  add_common(c_sup);
  add_train_flags(c_sup);
  c_sup->add_option("--fraction", fraction, "fraction of the training split to use");

  auto* c_infer = app.add_subcommand("infer", "segment a scene with a checkpoint");
  add_common(c_infer);
  c_infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  c_infer->add_option("--scene", scene, "input raster")->required();
  c_infer->add_option("--assignment", assignment, "class assignment record");
  c_infer->add_option("--output", out_file, "output raster path")->required();
  c_infer->add_option("--tile-size", tile_size, "tile side length");

  auto* c_eval = app.add_subcommand("evaluate", "score a checkpoint on the test subset");
  add_common(c_eval);
  c_eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  c_eval->add_option("--fit-on", fit_on, "assignment fitting subset");

  auto* c_otsu = app.add_subcommand("otsu", "classical thresholding baseline");
  add_common(c_otsu);
  c_otsu->add_option("--scene", scene, "input raster (default: synthetic test scene)");
  c_otsu->add_option("--mask", mask, "ground-truth raster");
  c_otsu->add_flag("--no-pre", no_pre, "skip Gaussian blur");
  c_otsu->add_flag("--no-post", no_post, "skip morphological cleanup");
  c_otsu->add_flag("--table", table, "run the pre/post ablation rows");

  auto* c_ens = app.add_subcommand("ensemble", "train members and majority-vote");
  add_common(c_ens);
  add_train_flags(c_ens);
  c_ens->add_option("--members", members, "ensemble size");

  auto* c_abl = app.add_subcommand("ablation", "repeated runs along one axis");
  add_common(c_abl);
  add_train_flags(c_abl);
  c_abl->add_option("--axis", axis, "clustering_loss_type|n_class|batch_size|channels|depth")
      ->required();
  c_abl->add_option("--values", values, "axis values")->required()->delimiter(',');
  c_abl->add_option("--repeats", repeats, "runs per value");

  auto* c_rep = app.add_subcommand("report", "render curves and tables from run logs");
  c_rep->add_option("--run", run_dirs, "run directory (repeatable)")->required();
  c_rep->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty() || !set_overrides.empty()) {
      nlohmann::json doc = nlohmann::json::object();
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) fail("config: cannot read " + config_path);
        f >> doc;
      }
      for (const auto& kv : set_overrides) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, "--set expects key=value, got: " + kv);
        nlohmann::json* node = &doc;
        std::istringstream keys(kv.substr(0, eq));
        std::string part;
        while (std::getline(keys, part, '.')) node = &(*node)[part];
        const std::string raw = kv.substr(eq + 1);
        try {
          *node = nlohmann::json::parse(raw);  // numbers, bools, arrays
        } catch (...) {
          *node = raw;  // plain string
        }
      }
      cfg = config_from_json(doc);
    }
    // environment override for the output directory; an explicit --out wins
    if (const char* dir = std::getenv("WETSEG_OUT_DIR")) cfg.output_dir = dir;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!scene.empty()) cfg.scene_path = scene;
    if (!mask.empty()) cfg.mask_path = mask;
    if (tile_size > 0) cfg.tile_size = tile_size;
    if (epochs >= 0) cfg.train.epochs = epochs;
    if (batch_size > 0) cfg.train.batch_size = batch_size;
    if (num_classes > 0) cfg.train.num_classes = num_classes;
    if (members > 0) cfg.ensemble_members = members;
    if (fraction > 0) cfg.supervised_fraction = fraction;
    if (!fit_on.empty()) cfg.fit_assignment_on = fit_on;
    if (uniform_loss) cfg.train.loss.weighted_clustering = false;
    if (!sched_step.empty()) cfg.train.schedule.per_epoch = sched_step == "epoch";
    if (c_train->parsed() || c_sup->parsed() || c_ens->parsed() || c_abl->parsed()) {
      for (auto* cmd : {c_train, c_sup, c_ens, c_abl})
        if (cmd->parsed() && cmd->count("--seed")) cfg.train.seed = seed;
    }

    if (c_synth->parsed()) return cmd_synth(cfg);
    if (c_tile->parsed()) return cmd_tile(cfg);
    if (c_train->parsed()) return cmd_train(cfg);
    if (c_sup->parsed()) return cmd_train_supervised(cfg);
    if (c_infer->parsed())
      return cmd_infer(checkpoint, scene, assignment, out_file, cfg);
    if (c_eval->parsed()) return cmd_evaluate(checkpoint, cfg);
    if (c_otsu->parsed()) return cmd_otsu(cfg, !no_pre, !no_post, table);
    if (c_ens->parsed()) return cmd_ensemble(cfg);
    if (c_abl->parsed()) return cmd_ablation(cfg, axis, values, repeats);
    if (c_rep->parsed()) return cmd_report(run_dirs, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
