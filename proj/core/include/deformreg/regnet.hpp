#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deformreg/nd/tape.hpp"
#include "deformreg/types.hpp"

namespace deformreg::regnet {

// Encoder-decoder layout. Level l runs at resolution input / 2^l with
// min(base_channels * 2^l, max_channels) feature channels.
struct ArchConfig {
  int levels = 4;
  int base_channels = 16;
  int height = 64;
  int width = 64;
  float leaky_slope = 0.1f;

  static constexpr int max_channels = 128;
  int channels(int level) const;
  // Throws ConfigError unless input_hw is divisible by 2^(levels-1).
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  nd::Tensor value;
};

// Parameters are kept in a fixed creation order; names are unique.
struct RegModel {
  ArchConfig arch;
  std::vector<NamedTensor> params;

  const nd::Tensor& param(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();
  // Deep copy with independent storage.
  RegModel clone() const;
};

// Fan-in scaled uniform init for convolutions, zero biases and all-zero flow
// heads; every predicted scale of a fresh model is the identity warp.
RegModel init_model(const ArchConfig& arch, std::uint64_t seed);

// Predicts one displacement field per scale, finest (full resolution) first.
// fixed and moving are [N,1,H,W] at the architecture's input size.
std::vector<nd::Tensor> forward(nd::Tape& tape, const RegModel& model, const nd::Tensor& fixed,
                                const nd::Tensor& moving);
std::vector<DeformationField> forward(const RegModel& model, const Image2D& fixed, const Image2D& moving);

// Model file: "DRG1", u32 version, arch (u32 levels, base, height, width;
// f32 slope), u32 block count, then named blocks (u32 name length, name,
// u32 rank, u32 dims..., little-endian f32 payload). `extra` blocks are
// appended after the parameters and handed back by deserialize().
inline constexpr std::uint32_t kModelFormatVersion = 1;
std::vector<std::uint8_t> serialize(const RegModel& model, std::span<const NamedTensor> extra = {});

struct LoadedModel {
  RegModel model;
  std::vector<NamedTensor> extra;
};
// Throws FormatError with the byte offset on bad magic, version, shape or
// truncation.
LoadedModel deserialize(std::span<const std::uint8_t> bytes);

void save_model(const std::string& path, const RegModel& model, std::span<const NamedTensor> extra = {});
LoadedModel load_model(const std::string& path);

}  // namespace deformreg::regnet
