#pragma once

#include <string>
#include <vector>

#include "wetseg/nn/layers.hpp"

namespace wetseg::nn {

struct UNetConfig {
  int depth = 2;          // pooling / upsampling stages
  int base_channels = 8;  // filters in the top-level convolutions
  int in_channels = 1;
  int expansive_convs = 2;  // convolutions per block on the expansive path

  int encoder_channels() const { return base_channels; }
  int divisor() const { return 1 << depth; }

  void validate() const {
    require(depth >= 1, "UNetConfig: depth must be >= 1");
    require(base_channels >= 1, "UNetConfig: base_channels must be >= 1");
    require(in_channels == 1, "UNetConfig: single-channel input expected");
    require(expansive_convs == 1 || expansive_convs == 2,
            "UNetConfig: expansive_convs must be 1 or 2");
  }
};

// ---------------------------------------------------------------------------
// ConvBlock: [3x3 conv -> batch norm -> ReLU] x n
// ---------------------------------------------------------------------------

template <typename T>
struct ConvBlock {
  std::vector<Conv2d<T>> convs;
  std::vector<BatchNorm2d<T>> bns;
  Relu<T> relu;

  struct Cache {
    std::vector<typename Conv2d<T>::Cache> conv;
    std::vector<typename BatchNorm2d<T>::Cache> bn;
    std::vector<typename Relu<T>::Cache> act;
  };

  ConvBlock() = default;
  ConvBlock(int in_c, int out_c, int n_convs) {
    for (int i = 0; i < n_convs; ++i) {
      convs.emplace_back(i == 0 ? in_c : out_c, out_c, 3);
      bns.emplace_back(out_c);
    }
  }

  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache, bool training) {
    cache.conv.resize(convs.size());
    cache.bn.resize(convs.size());
    cache.act.resize(convs.size());
    Tensor4<T> cur = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      cur = convs[i].forward(cur, cache.conv[i]);
      cur = bns[i].forward(cur, cache.bn[i], training);
      cur = relu.forward(cur, cache.act[i]);
    }
    return cur;
  }

  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) {
    Tensor4<T> cur = dy;
    for (std::size_t i = convs.size(); i-- > 0;) {
      cur = relu.backward(cur, cache.act[i]);
      cur = bns[i].backward(cur, cache.bn[i]);
      cur = convs[i].backward(cur, cache.conv[i]);
    }
    return cur;
  }

  void init_he(NormalSampler<T>& normal) {
    for (auto& c : convs) c.init_he(normal);
  }
  void collect_params(std::vector<ParamView<T>>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect_params(out);
      bns[i].collect_params(out);
    }
  }
  void zero_grad() {
    for (auto& c : convs) c.zero_grad();
    for (auto& b : bns) b.zero_grad();
  }
  void describe(std::vector<std::string>& ops) const {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      ops.push_back("conv3x3");
      ops.push_back("batchnorm");
      ops.push_back("relu");
    }
  }
};

// ---------------------------------------------------------------------------
// UNetEncoder: contracting path, bottom block and expansive path with
// nearest-neighbour upsampling and skip concatenation. Output keeps the input
// resolution with base_channels embedding channels per pixel.
// ---------------------------------------------------------------------------

template <typename T>
struct UNetEncoder {
  UNetConfig cfg;
  std::vector<ConvBlock<T>> down;  // depth blocks
  ConvBlock<T> bottom;
  std::vector<ConvBlock<T>> up;  // depth blocks, index d matches skip level d
  MaxPool2x2<T> pool;
  UpsampleNearest2x<T> upsample;

  struct Cache {
    std::vector<typename ConvBlock<T>::Cache> down;
    std::vector<typename MaxPool2x2<T>::Cache> pools;
    typename ConvBlock<T>::Cache bottom;
    std::vector<typename ConvBlock<T>::Cache> up;
    std::vector<int> skip_channels;
  };

  UNetEncoder() = default;
  explicit UNetEncoder(const UNetConfig& c) : cfg(c) {
    cfg.validate();
    for (int d = 0; d < cfg.depth; ++d) {
      const int in_c = d == 0 ? cfg.in_channels : cfg.base_channels << (d - 1);
      down.emplace_back(in_c, cfg.base_channels << d, 2);
    }
    bottom = ConvBlock<T>(cfg.base_channels << (cfg.depth - 1), cfg.base_channels << cfg.depth, 2);
    up.resize(cfg.depth);
    for (int d = cfg.depth - 1; d >= 0; --d) {
      const int above = cfg.base_channels << (d + 1);
      const int skip = cfg.base_channels << d;
      up[d] = ConvBlock<T>(above + skip, skip, cfg.expansive_convs);
    }
  }

  void init_he(std::uint64_t seed) {
    auto rng = make_rng(seed, /*stream=*/0x0e5cu);
    NormalSampler<T> normal(rng);
    for (auto& b : down) b.init_he(normal);
    bottom.init_he(normal);
    for (int d = cfg.depth - 1; d >= 0; --d) up[d].init_he(normal);
  }

  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache, bool training) {
    require(x.c == cfg.in_channels, "UNetEncoder: wrong input channels");
    require(x.h % cfg.divisor() == 0 && x.w % cfg.divisor() == 0,
            "UNetEncoder: spatial size must be divisible by 2^depth");
    cache.down.resize(cfg.depth);
    cache.pools.resize(cfg.depth);
    cache.up.resize(cfg.depth);
    cache.skip_channels.resize(cfg.depth);
    std::vector<Tensor4<T>> skips(cfg.depth);
    Tensor4<T> cur = x;
    for (int d = 0; d < cfg.depth; ++d) {
      skips[d] = down[d].forward(cur, cache.down[d], training);
      cache.skip_channels[d] = skips[d].c;
      cur = pool.forward(skips[d], cache.pools[d]);
    }
    cur = bottom.forward(cur, cache.bottom, training);
    for (int d = cfg.depth - 1; d >= 0; --d) {
      cur = upsample.forward(cur);
      cur = concat_channels(cur, skips[d]);
      cur = up[d].forward(cur, cache.up[d], training);
    }
    return cur;
  }

  /// Backward through the full encoder; parameter gradients accumulate into
  /// each layer. Returns the gradient w.r.t. the input (rarely needed).
  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) {
    Tensor4<T> cur = dy;
    std::vector<Tensor4<T>> dskips(cfg.depth);
    for (int d = 0; d < cfg.depth; ++d) {
      cur = up[d].backward(cur, cache.up[d]);
      Tensor4<T> dabove, dskip;
      const int above = cur.c - cache.skip_channels[d];
      split_channels(cur, dabove, dskip, above);
      dskips[d] = std::move(dskip);
      cur = upsample.backward(dabove);
    }
    cur = bottom.backward(cur, cache.bottom);
    for (int d = cfg.depth - 1; d >= 0; --d) {
      cur = pool.backward(cur, cache.pools[d]);
      for (std::size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += dskips[d].v[i];
      cur = down[d].backward(cur, cache.down[d]);
    }
    return cur;
  }

  void collect_params(std::vector<ParamView<T>>& out) {
    for (auto& b : down) b.collect_params(out);
    bottom.collect_params(out);
    for (int d = cfg.depth - 1; d >= 0; --d) up[d].collect_params(out);
  }
  void zero_grad() {
    for (auto& b : down) b.zero_grad();
    bottom.zero_grad();
    for (auto& b : up) b.zero_grad();
  }

  /// Ordered list of every operation in the forward pass, for architecture
  /// assertions (e.g. that no transposed convolution exists anywhere).
  std::vector<std::string> architecture_ops() const {
    std::vector<std::string> ops;
    for (const auto& b : down) {
      b.describe(ops);
      ops.push_back("maxpool2x2");
    }
    bottom.describe(ops);
    for (int d = cfg.depth - 1; d >= 0; --d) {
      ops.push_back("upsample_nearest2x");
      ops.push_back("concat");
      up[d].describe(ops);
    }
    return ops;
  }
};

// ---------------------------------------------------------------------------
// PredictionHead: pointwise 1x1 convolution to class logits + batch norm.
// ---------------------------------------------------------------------------

template <typename T>
struct PredictionHead {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;
  int num_classes = 0;

  struct Cache {
    typename Conv2d<T>::Cache conv;
    typename BatchNorm2d<T>::Cache bn;
  };

  PredictionHead() = default;
  PredictionHead(int enc_channels, int n_class)
      : conv(enc_channels, n_class, 1), bn(n_class), num_classes(n_class) {
    require(n_class >= 2, "PredictionHead: need at least two classes");
  }

  void init_he(std::uint64_t seed) {
    auto rng = make_rng(seed, /*stream=*/0x4eadu);
    NormalSampler<T> normal(rng);
    conv.init_he(normal);
  }

  Tensor4<T> forward(const Tensor4<T>& enc, Cache& cache, bool training) {
    auto z = conv.forward(enc, cache.conv);
    return bn.forward(z, cache.bn, training);
  }

  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) {
    auto d = bn.backward(dy, cache.bn);
    return conv.backward(d, cache.conv);
  }

  void collect_params(std::vector<ParamView<T>>& out) {
    conv.collect_params(out);
    bn.collect_params(out);
  }
  void zero_grad() {
    conv.zero_grad();
    bn.zero_grad();
  }
  std::vector<std::string> architecture_ops() const { return {"conv1x1", "batchnorm"}; }
};

// ---------------------------------------------------------------------------
// SupervisedModel: encoder + pointwise conv to one channel + sigmoid.
// ---------------------------------------------------------------------------

template <typename T>
struct SupervisedModel {
  UNetEncoder<T> encoder;
  Conv2d<T> out_conv;

  struct Cache {
    typename UNetEncoder<T>::Cache enc;
    typename Conv2d<T>::Cache conv;
    Tensor4<T> prob;  // sigmoid output, reused in backward
  };

  SupervisedModel() = default;
  explicit SupervisedModel(const UNetConfig& cfg)
      : encoder(cfg), out_conv(cfg.encoder_channels(), 1, 1) {}

  void init_he(std::uint64_t seed) {
    encoder.init_he(seed);
    auto rng = make_rng(seed, /*stream=*/0x51);
    NormalSampler<T> normal(rng);
    out_conv.init_he(normal);
  }

  /// Water probability per pixel, strictly inside (0, 1).
  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache, bool training) {
    auto enc = encoder.forward(x, cache.enc, training);
    auto z = out_conv.forward(enc, cache.conv);
    Tensor4<T> p(z.n, z.c, z.h, z.w);
    for (std::size_t i = 0; i < z.v.size(); ++i)
      p.v[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(z.v[i]))));
    cache.prob = p;
    return p;
  }

  void backward(const Tensor4<T>& dprob, const Cache& cache) {
    Tensor4<T> dz(dprob.n, dprob.c, dprob.h, dprob.w);
    for (std::size_t i = 0; i < dz.v.size(); ++i) {
      const T p = cache.prob.v[i];
      dz.v[i] = dprob.v[i] * p * (T{1} - p);
    }
    auto denc = out_conv.backward(dz, cache.conv);
    encoder.backward(denc, cache.enc);
  }

  void collect_params(std::vector<ParamView<T>>& out) {
    encoder.collect_params(out);
    out_conv.collect_params(out);
  }
  void zero_grad() {
    encoder.zero_grad();
    out_conv.zero_grad();
  }
};

/// Exact count of trainable scalars.
template <typename T, template <typename> class Model>
std::size_t count_parameters(Model<T>& model) {
  std::vector<ParamView<T>> params;
  model.collect_params(params);
  std::size_t total = 0;
  for (const auto& p : params) total += p.size;
  return total;
}

}  // namespace wetseg::nn
