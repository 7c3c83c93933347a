#pragma once

#include <cstdint>
#include <string>

#include "deformreg/engine.hpp"
#include "deformreg/regnet.hpp"
#include "deformreg/synth.hpp"

namespace deformreg::config {

struct Paths {
  std::string dataset;
  std::string output;
  std::string checkpoint;
};

// One JSON document with the sections "arch", "loss", "train", "optimize"
// and "paths"; every section and key is optional. Loss weights may be a
// scalar (applied at every scale) or a list with one entry per arch level.
struct RunConfig {
  regnet::ArchConfig arch;
  std::uint64_t init_seed = 1;
  engine::TrainConfig train;
  engine::OptimizeConfig optimize;
  Paths paths;
};

// Both parsers are strict: unknown keys, wrong types and inconsistent values
// raise ConfigError naming the JSON path, e.g. "$.loss.beta[2]".
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Keys: pattern, base_image, family, max_displacement, pair_count, seed,
// noise_sigma, height, width.
synth::SynthSpec parse_synth_spec(const std::string& json_text);
synth::SynthSpec load_synth_spec(const std::string& path);

}  // namespace deformreg::config
