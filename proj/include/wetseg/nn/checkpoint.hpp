#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wetseg/nn/unet.hpp"

namespace wetseg::nn {

// Checkpoint layout (version 1, little endian):
//   bytes 0..7   magic "WSEGCKP1"
//   bytes 8..11  u32 header length
//   header       JSON: kind, scalar width, model config, num_classes,
//                init_seed, trained_epochs
//   payload      raw parameter buffers in fixed traversal order; batch-norm
//                running statistics ride along as f64 so that inference after
//                a round trip is bit-identical.

inline constexpr char kCheckpointMagic[8] = {'W', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

struct CheckpointMeta {
  std::string kind;  // "self_supervised" | "supervised"
  UNetConfig model;
  int num_classes = 0;  // 0 for supervised checkpoints
  std::uint64_t init_seed = 0;
  int trained_epochs = 0;
};

namespace detail {

template <typename T>
void write_buf(std::ostream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_buf(std::istream& is, std::vector<T>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(T)));
  if (!is) fail("checkpoint: truncated parameter payload");
}

template <typename T, typename Stream, typename BufOp>
void walk_block(ConvBlock<T>& block, Stream& s, BufOp op) {
  for (std::size_t i = 0; i < block.convs.size(); ++i) {
    op(s, block.convs[i].w);
    op(s, block.convs[i].b);
    op(s, block.bns[i].gamma);
    op(s, block.bns[i].beta);
    op(s, block.bns[i].running_mean);
    op(s, block.bns[i].running_var);
  }
}

template <typename T, typename Stream, typename BufOp>
void walk_encoder(UNetEncoder<T>& enc, Stream& s, BufOp op) {
  for (auto& b : enc.down) walk_block(b, s, op);
  walk_block(enc.bottom, s, op);
  for (auto& b : enc.up) walk_block(b, s, op);
}

template <typename T, typename Stream, typename BufOp>
void walk_head(PredictionHead<T>& head, Stream& s, BufOp op) {
  op(s, head.conv.w);
  op(s, head.conv.b);
  op(s, head.bn.gamma);
  op(s, head.bn.beta);
  op(s, head.bn.running_mean);
  op(s, head.bn.running_var);
}

inline nlohmann::json meta_to_json(const CheckpointMeta& meta) {
  return {{"version", 1},
          {"kind", meta.kind},
          {"scalar", "f32"},
          {"model",
           {{"depth", meta.model.depth},
            {"base_channels", meta.model.base_channels},
            {"in_channels", meta.model.in_channels},
            {"expansive_convs", meta.model.expansive_convs}}},
          {"num_classes", meta.num_classes},
          {"init_seed", meta.init_seed},
          {"trained_epochs", meta.trained_epochs}};
}

inline CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta meta;
  if (j.value("version", 0) != 1) fail("checkpoint: unsupported version");
  if (j.value("scalar", "") != std::string("f32"))
    fail("checkpoint: unsupported scalar width");
  meta.kind = j.at("kind").get<std::string>();
  meta.model.depth = j.at("model").at("depth").get<int>();
  meta.model.base_channels = j.at("model").at("base_channels").get<int>();
  meta.model.in_channels = j.at("model").at("in_channels").get<int>();
  meta.model.expansive_convs = j.at("model").at("expansive_convs").get<int>();
  meta.num_classes = j.at("num_classes").get<int>();
  meta.init_seed = j.at("init_seed").get<std::uint64_t>();
  meta.trained_epochs = j.at("trained_epochs").get<int>();
  return meta;
}

inline void write_preamble(std::ostream& os, const CheckpointMeta& meta) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string header = meta_to_json(meta).dump();
  const std::uint32_t len = static_cast<std::uint32_t>(header.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
}

inline CheckpointMeta read_preamble(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    fail("checkpoint: bad magic (not a wetseg checkpoint)");
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  is.read(header.data(), len);
  if (!is) fail("checkpoint: truncated header");
  return meta_from_json(nlohmann::json::parse(header));
}

struct Writer {
  template <typename T>
  void operator()(std::ostream& os, const std::vector<T>& v) const {
    write_buf(os, v);
  }
};
struct Reader {
  template <typename T>
  void operator()(std::istream& is, std::vector<T>& v) const {
    read_buf(is, v);
  }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, UNetEncoder<float>& encoder,
                            PredictionHead<float>& head, CheckpointMeta meta) {
  meta.kind = "self_supervised";
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("checkpoint: cannot write " + path);
  detail::write_preamble(os, meta);
  detail::walk_encoder(encoder, os, detail::Writer{});
  detail::walk_head(head, os, detail::Writer{});
  if (!os) fail("checkpoint: write failed for " + path);
}

inline void save_checkpoint(const std::string& path, SupervisedModel<float>& model,
                            CheckpointMeta meta) {
  meta.kind = "supervised";
  meta.num_classes = 0;
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("checkpoint: cannot write " + path);
  detail::write_preamble(os, meta);
  detail::walk_encoder(model.encoder, os, detail::Writer{});
  std::ostream& s = os;
  detail::Writer{}(s, model.out_conv.w);
  detail::Writer{}(s, model.out_conv.b);
  if (!os) fail("checkpoint: write failed for " + path);
}

inline CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("checkpoint: cannot read " + path);
  return detail::read_preamble(is);
}

struct SelfSupervisedCheckpoint {
  CheckpointMeta meta;
  UNetEncoder<float> encoder;
  PredictionHead<float> head;
};

inline SelfSupervisedCheckpoint load_self_supervised_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("checkpoint: cannot read " + path);
  SelfSupervisedCheckpoint out{detail::read_preamble(is), {}, {}};
  if (out.meta.kind != "self_supervised")
    fail("checkpoint: expected a self-supervised checkpoint in " + path);
  out.encoder = UNetEncoder<float>(out.meta.model);
  out.head = PredictionHead<float>(out.meta.model.encoder_channels(), out.meta.num_classes);
  detail::walk_encoder(out.encoder, is, detail::Reader{});
  detail::walk_head(out.head, is, detail::Reader{});
  return out;
}

struct SupervisedCheckpoint {
  CheckpointMeta meta;
  SupervisedModel<float> model;
};

inline SupervisedCheckpoint load_supervised_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("checkpoint: cannot read " + path);
  SupervisedCheckpoint out{detail::read_preamble(is), {}};
  if (out.meta.kind != "supervised")
    fail("checkpoint: expected a supervised checkpoint in " + path);
  out.model = SupervisedModel<float>(out.meta.model);
  detail::walk_encoder(out.model.encoder, is, detail::Reader{});
  std::istream& s = is;
  detail::Reader{}(s, out.model.out_conv.w);
  detail::Reader{}(s, out.model.out_conv.b);
  return out;
}

}  // namespace wetseg::nn
