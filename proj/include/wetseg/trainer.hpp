#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "wetseg/augment.hpp"
#include "wetseg/losses.hpp"
#include "wetseg/metrics.hpp"
#include "wetseg/nn/checkpoint.hpp"
#include "wetseg/nn/optimizer.hpp"
#include "wetseg/nn/schedule.hpp"
#include "wetseg/nn/unet.hpp"
#include "wetseg/postprocess.hpp"
#include "wetseg/scene.hpp"

namespace wetseg {

struct TrainConfig {
  nn::UNetConfig model;
  int num_classes = 10;
  LossWeights loss;
  nn::OptimizerSpec optimizer;
  nn::ScheduleSpec schedule;
  AugmentConfig augment;
  int epochs = 100;
  int batch_size = 16;
  int eval_batch_size = 16;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Metric logs: one record per optimizer step plus one per epoch. These are
// what the CLI persists as line-delimited JSON.
// ---------------------------------------------------------------------------

struct SelfStepRecord {
  int epoch = 0;
  int step = 0;
  long long global_step = 0;
  double clustering = 0, clustering_aug = 0, positive = 0, negative = 0, total = 0;
  double lr = 0;
  int distinct_classes = 0;
};

struct SupervisedStepRecord {
  int epoch = 0;
  int step = 0;
  long long global_step = 0;
  double dice = 0;
  double lr = 0;
};

struct EpochRecord {
  int epoch = 0;
  double val_iou = std::numeric_limits<double>::quiet_NaN();
};

inline nlohmann::json to_json(const SelfStepRecord& r) {
  return {{"kind", "step"},          {"epoch", r.epoch},
          {"step", r.step},          {"global_step", r.global_step},
          {"loss_clustering", r.clustering},
          {"loss_clustering_aug", r.clustering_aug},
          {"loss_positive", r.positive},
          {"loss_negative", r.negative},
          {"loss_total", r.total},   {"lr", r.lr},
          {"distinct_classes", r.distinct_classes}};
}

inline nlohmann::json to_json(const SupervisedStepRecord& r) {
  return {{"kind", "step"},        {"epoch", r.epoch},     {"step", r.step},
          {"global_step", r.global_step}, {"loss_dice", r.dice}, {"lr", r.lr}};
}

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"kind", "epoch"}, {"epoch", r.epoch}};
  if (std::isnan(r.val_iou))
    j["val_iou"] = nullptr;
  else
    j["val_iou"] = r.val_iou;
  return j;
}

struct SelfTrainLog {
  std::vector<SelfStepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct SupervisedTrainLog {
  std::vector<SupervisedStepRecord> steps;
  std::vector<EpochRecord> epochs;
};

// ---------------------------------------------------------------------------
// Models under training.
// ---------------------------------------------------------------------------

/// The Siamese pair of encoders plus the shared prediction head. The two
/// encoders share an architecture, never weight storage; only `encoder` and
/// `head` survive to inference.
template <typename T>
struct SelfSupervisedModel {
  nn::UNetConfig cfg;
  int num_classes = 0;
  std::uint64_t init_seed = 0;
  int trained_epochs = 0;
  nn::UNetEncoder<T> encoder;
  nn::UNetEncoder<T> encoder_aug;
  nn::PredictionHead<T> head;

  SelfSupervisedModel() = default;
  SelfSupervisedModel(const nn::UNetConfig& c, int n_class, std::uint64_t seed)
      : cfg(c),
        num_classes(n_class),
        init_seed(seed),
        encoder(c),
        encoder_aug(c),
        head(c.encoder_channels(), n_class) {
    encoder.init_he(mix_seed(seed, 0x11));
    encoder_aug.init_he(mix_seed(seed, 0x22));
    head.init_he(mix_seed(seed, 0x33));
  }
};

namespace detail {

inline nn::Tensor4<float> tiles_to_tensor(const std::vector<ImageF>& tiles) {
  const int n = static_cast<int>(tiles.size());
  const int s = tiles.front().rows();
  nn::Tensor4<float> x(n, 1, s, s);
  for (int i = 0; i < n; ++i) {
    require(tiles[i].rows() == s && tiles[i].cols() == s,
            "tiles_to_tensor: mixed tile sizes in one batch");
    std::copy_n(tiles[i].data(), tiles[i].size(), x.sample(i));
  }
  return x;
}

inline nn::Tensor4<float> masks_to_tensor(const std::vector<MaskImage>& masks) {
  const int n = static_cast<int>(masks.size());
  const int s = masks.front().rows();
  nn::Tensor4<float> t(n, 1, s, s);
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < masks[i].size(); ++j)
      t.sample(i)[j] = static_cast<float>(masks[i].raw()[j]);
  return t;
}

inline std::vector<std::size_t> shuffled_indices(const std::vector<std::size_t>& base,
                                                 std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order = base;
  auto rng = make_rng(seed, /*stream=*/0xe90cu, epoch);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

/// Batch boundaries over a tile ordering; a trailing singleton is dropped
/// because a derangement needs at least two tiles.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                                     int batch_size,
                                                                     std::size_t min_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min<std::size_t>(batch_size, n - start);
    if (len >= min_size) out.emplace_back(start, len);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inference.
// ---------------------------------------------------------------------------

/// Per-tile model-class prediction in evaluation mode (running batch-norm
/// statistics); only the standard encoder and the head are involved.
template <typename T>
std::vector<MaskImage> predict_class_masks(nn::UNetEncoder<T>& encoder,
                                           nn::PredictionHead<T>& head,
                                           const std::vector<ImageF>& tiles,
                                           int batch_size) {
  std::vector<MaskImage> out;
  out.reserve(tiles.size());
  for (std::size_t start = 0; start < tiles.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len =
        std::min<std::size_t>(batch_size, tiles.size() - start);
    std::vector<ImageF> chunk(tiles.begin() + start, tiles.begin() + start + len);
    auto x = detail::tiles_to_tensor(chunk);
    typename nn::UNetEncoder<T>::Cache ec;
    typename nn::PredictionHead<T>::Cache hc;
    auto enc = encoder.forward(x, ec, /*training=*/false);
    auto logits = head.forward(enc, hc, /*training=*/false);
    const std::size_t hw = logits.plane();
    for (std::size_t i = 0; i < len; ++i) {
      MaskImage m(logits.h, logits.w);
      const T* s = logits.sample(static_cast<int>(i));
      for (std::size_t p = 0; p < hw; ++p) {
        int best = 0;
        T bv = s[p];
        for (int ic = 1; ic < logits.c; ++ic)
          if (s[ic * hw + p] > bv) {
            bv = s[ic * hw + p];
            best = ic;
          }
        m.raw()[p] = static_cast<std::uint8_t>(best);
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

template <typename T>
std::vector<MaskImage> predict_class_masks(SelfSupervisedModel<T>& model,
                                           const std::vector<ImageF>& tiles,
                                           int batch_size) {
  return predict_class_masks(model.encoder, model.head, tiles, batch_size);
}

/// Full-scene inference: tile, forward, reassemble at tile origins. The
/// output covers the tiled region (partial edges are not predicted).
template <typename T>
MaskImage infer_scene(nn::UNetEncoder<T>& encoder, nn::PredictionHead<T>& head,
                      const Scene& scene, int tile_size, int batch_size) {
  auto tiles = tile_scene(scene, tile_size);
  require(!tiles.empty(), "infer_scene: scene smaller than the tile size");
  std::vector<ImageF> pixels;
  pixels.reserve(tiles.size());
  for (const auto& t : tiles) pixels.push_back(t.pixels);
  auto masks = predict_class_masks(encoder, head, pixels, batch_size);
  const int ny = scene.rows() / tile_size, nx = scene.cols() / tile_size;
  MaskImage out(ny * tile_size, nx * tile_size);
  for (std::size_t i = 0; i < tiles.size(); ++i)
    out.paste(masks[i], tiles[i].row0, tiles[i].col0);
  return out;
}

/// Water-probability inference for the supervised model, thresholded at 0.5.
template <typename T>
std::vector<MaskImage> predict_binary_masks(nn::SupervisedModel<T>& model,
                                            const std::vector<ImageF>& tiles,
                                            int batch_size) {
  std::vector<MaskImage> out;
  out.reserve(tiles.size());
  for (std::size_t start = 0; start < tiles.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t len =
        std::min<std::size_t>(batch_size, tiles.size() - start);
    std::vector<ImageF> chunk(tiles.begin() + start, tiles.begin() + start + len);
    auto x = detail::tiles_to_tensor(chunk);
    typename nn::SupervisedModel<T>::Cache cc;
    auto prob = model.forward(x, cc, /*training=*/false);
    const std::size_t hw = prob.plane();
    for (std::size_t i = 0; i < len; ++i) {
      MaskImage m(prob.h, prob.w);
      const T* s = prob.sample(static_cast<int>(i));
      for (std::size_t p = 0; p < hw; ++p) m.raw()[p] = s[p] > T{0.5} ? 1 : 0;
      out.push_back(std::move(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation during training: fit the class assignment on the validation set
// and score the batch-mean IOU, all in evaluation mode.
// ---------------------------------------------------------------------------

struct ValidationResult {
  double iou = std::numeric_limits<double>::quiet_NaN();
  ClassAssignment assignment;
};

template <typename T>
ValidationResult validate_self_supervised(SelfSupervisedModel<T>& model,
                                          const std::vector<Tile>& tiles,
                                          const std::vector<std::size_t>& subset,
                                          int eval_batch) {
  ValidationResult res;
  if (subset.empty()) return res;
  std::vector<ImageF> pixels;
  std::vector<MaskImage> gt;
  for (auto i : subset) {
    if (!tiles[i].mask) return res;  // unlabeled validation set: no IOU
    pixels.push_back(tiles[i].pixels);
    gt.push_back(*tiles[i].mask);
  }
  auto class_masks = predict_class_masks(model, pixels, eval_batch);
  res.assignment = fit_assignment(class_masks, gt, model.num_classes);
  std::vector<MaskImage> binary;
  binary.reserve(class_masks.size());
  for (const auto& m : class_masks) binary.push_back(apply_assignment(m, res.assignment));
  res.iou = evaluate_dataset(binary, gt, eval_batch).dataset_iou;
  return res;
}

// ---------------------------------------------------------------------------
// Self-supervised training loop.
// ---------------------------------------------------------------------------

struct SelfTrainOutcome {
  SelfSupervisedModel<float> model;
  SelfTrainLog log;
  std::optional<SelfSupervisedModel<float>> best_model;
  double best_val_iou = -1.0;
  int best_epoch = -1;
};

/// Runs the three-path training procedure: the standard batch through the
/// standard encoder, the blurred and the deranged batch through the augmented
/// encoder, every path through the shared head, with all three sub-models
/// updated jointly from the summed loss.
inline SelfTrainOutcome train_self_supervised(const std::vector<Tile>& tiles,
                                              const DatasetSplit& split,
                                              const TrainConfig& cfg,
                                              std::ostream* log_stream = nullptr) {
  require(cfg.batch_size >= 2, "train_self_supervised: batch_size must be >= 2");
  require(!split.train.empty(), "train_self_supervised: empty training split");
  cfg.model.validate();
  cfg.loss.validate();
  cfg.optimizer.validate();
  const int s = tiles[split.train.front()].size();
  for (auto i : split.train) {
    require(tiles[i].size() == s && tiles[i].pixels.cols() == s,
            "train_self_supervised: tiles must share one square size");
  }
  require(s % cfg.model.divisor() == 0,
          "train_self_supervised: tile size incompatible with model depth");

  SelfTrainOutcome out;
  out.model = SelfSupervisedModel<float>(cfg.model, cfg.num_classes, cfg.seed);
  auto& model = out.model;

  const auto ranges = detail::batch_ranges(split.train.size(), cfg.batch_size, 2);
  require(!ranges.empty(), "train_self_supervised: no usable batch (need >= 2 tiles)");
  const auto sched = cfg.schedule.resolved(static_cast<int>(ranges.size()));
  sched.validate();

  std::vector<nn::ParamView<float>> params;
  model.encoder.collect_params(params);
  model.encoder_aug.collect_params(params);
  model.head.collect_params(params);
  nn::AdamW<float> opt(params, cfg.optimizer);

  long long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::shuffled_indices(split.train, cfg.seed, epoch);
    int step = 0;
    for (const auto& [start, len] : detail::batch_ranges(order.size(), cfg.batch_size, 2)) {
      TileBatch batch;
      for (std::size_t i = start; i < start + len; ++i) {
        batch.pixels.push_back(tiles[order[i]].pixels);
        batch.tile_ids.push_back(tiles[order[i]].id());
      }
      const auto triplet =
          make_triplet(batch, mix_seed(cfg.seed, 0xba7c4u, global_step), cfg.augment);

      auto x_std = detail::tiles_to_tensor(triplet.standard.pixels);
      auto x_aug = detail::tiles_to_tensor(triplet.augmented.pixels);
      auto x_shuf = detail::tiles_to_tensor(triplet.shuffled.pixels);

      model.encoder.zero_grad();
      model.encoder_aug.zero_grad();
      model.head.zero_grad();

      typename nn::UNetEncoder<float>::Cache ec1, ec2, ec3;
      typename nn::PredictionHead<float>::Cache hc1, hc2, hc3;
      auto z_std = model.head.forward(model.encoder.forward(x_std, ec1, true), hc1, true);
      auto z_aug =
          model.head.forward(model.encoder_aug.forward(x_aug, ec2, true), hc2, true);
      auto z_shuf =
          model.head.forward(model.encoder_aug.forward(x_shuf, ec3, true), hc3, true);

      TripletGrads<float> grads;
      const LossReport report = total_loss(z_std, z_aug, z_shuf, cfg.loss, &grads);

      model.encoder.backward(model.head.backward(grads.standard, hc1), ec1);
      model.encoder_aug.backward(model.head.backward(grads.augmented, hc2), ec2);
      model.encoder_aug.backward(model.head.backward(grads.shuffled, hc3), ec3);

      const long long sched_step = sched.per_epoch ? epoch : global_step;
      const double lr = nn::lr_at(sched_step, cfg.optimizer.lr, sched);
      opt.step(lr);

      SelfStepRecord rec{epoch,
                         step,
                         global_step,
                         report.clustering,
                         report.clustering_aug,
                         report.positive,
                         report.negative,
                         report.total,
                         lr,
                         report.distinct_classes()};
      out.log.steps.push_back(rec);
      if (log_stream) *log_stream << to_json(rec).dump() << '\n';
      ++step;
      ++global_step;
    }

    const auto val =
        validate_self_supervised(model, tiles, split.validation, cfg.eval_batch_size);
    EpochRecord erec{epoch, val.iou};
    out.log.epochs.push_back(erec);
    if (log_stream) *log_stream << to_json(erec).dump() << '\n';
    if (!std::isnan(val.iou) && val.iou > out.best_val_iou) {
      out.best_val_iou = val.iou;
      out.best_epoch = epoch;
      out.best_model = model;
      out.best_model->trained_epochs = epoch + 1;
    }
    model.trained_epochs = epoch + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supervised baseline training loop (Dice loss).
// ---------------------------------------------------------------------------

struct SupervisedTrainOutcome {
  nn::SupervisedModel<float> model;
  SupervisedTrainLog log;
  std::vector<std::size_t> used_tiles;  // the deterministic training subset
  int trained_epochs = 0;
  std::uint64_t init_seed = 0;
};

inline SupervisedTrainOutcome train_supervised(const std::vector<Tile>& tiles,
                                               const DatasetSplit& split, double fraction,
                                               const TrainConfig& cfg,
                                               std::ostream* log_stream = nullptr) {
  require(fraction > 0 && fraction <= 1.0, "train_supervised: fraction must be in (0,1]");
  require(!split.train.empty(), "train_supervised: empty training split");
  cfg.model.validate();
  for (auto i : split.train)
    require(tiles[i].mask.has_value(), "train_supervised: training tiles must carry masks");

  // Deterministic subset: shuffle once by seed, keep the first floor(f*n).
  auto subset = detail::shuffled_indices(split.train, cfg.seed, /*epoch=*/0x5ab5e7u);
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(fraction * static_cast<double>(subset.size())));
  subset.resize(keep);

  SupervisedTrainOutcome out;
  out.used_tiles = subset;
  out.init_seed = cfg.seed;
  out.model = nn::SupervisedModel<float>(cfg.model);
  out.model.init_he(mix_seed(cfg.seed, 0x44));

  const int s = tiles[subset.front()].size();
  require(s % cfg.model.divisor() == 0,
          "train_supervised: tile size incompatible with model depth");

  const auto ranges = detail::batch_ranges(subset.size(), cfg.batch_size, 1);
  const auto sched = cfg.schedule.resolved(static_cast<int>(ranges.size()));
  sched.validate();

  std::vector<nn::ParamView<float>> params;
  out.model.collect_params(params);
  nn::AdamW<float> opt(params, cfg.optimizer);

  long long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::shuffled_indices(subset, cfg.seed, epoch);
    int step = 0;
    for (const auto& [start, len] : detail::batch_ranges(order.size(), cfg.batch_size, 1)) {
      std::vector<ImageF> pix;
      std::vector<MaskImage> msk;
      auto rng = make_rng(cfg.seed, 0xf11b5u, global_step);
      auto uniform01 = [&rng]() { return (rng() >> 11) * (1.0 / 9007199254740992.0); };
      for (std::size_t i = start; i < start + len; ++i) {
        const Tile& t = tiles[order[i]];
        FlipState f{uniform01() < cfg.augment.flip_prob,
                    uniform01() < cfg.augment.flip_prob};
        pix.push_back(apply_flips(t.pixels, f));
        msk.push_back(apply_flips(*t.mask, f));
      }
      auto x = detail::tiles_to_tensor(pix);
      auto target = detail::masks_to_tensor(msk);

      out.model.zero_grad();
      typename nn::SupervisedModel<float>::Cache cc;
      auto prob = out.model.forward(x, cc, true);
      nn::Tensor4<float> dprob;
      const double dice = dice_loss(prob, target, &dprob);
      out.model.backward(dprob, cc);

      const long long sched_step = sched.per_epoch ? epoch : global_step;
      const double lr = nn::lr_at(sched_step, cfg.optimizer.lr, sched);
      opt.step(lr);

      SupervisedStepRecord rec{epoch, step, global_step, dice, lr};
      out.log.steps.push_back(rec);
      if (log_stream) *log_stream << to_json(rec).dump() << '\n';
      ++step;
      ++global_step;
    }

    EpochRecord erec{epoch, std::numeric_limits<double>::quiet_NaN()};
    if (!split.validation.empty()) {
      std::vector<ImageF> vpix;
      std::vector<MaskImage> vgt;
      bool labeled = true;
      for (auto i : split.validation) {
        if (!tiles[i].mask) {
          labeled = false;
          break;
        }
        vpix.push_back(tiles[i].pixels);
        vgt.push_back(*tiles[i].mask);
      }
      if (labeled) {
        auto pred = predict_binary_masks(out.model, vpix, cfg.eval_batch_size);
        erec.val_iou = evaluate_dataset(pred, vgt, cfg.eval_batch_size).dataset_iou;
      }
    }
    out.log.epochs.push_back(erec);
    if (log_stream) *log_stream << to_json(erec).dump() << '\n';
    out.trained_epochs = epoch + 1;
  }
  return out;
}

}  // namespace wetseg
