#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "deformreg/dataset.hpp"

namespace deformreg::synth {

enum class Family { Translation, Rotation, GaussianBumps };

std::string family_name(Family f);
Family parse_family(const std::string& name);  // throws ConfigError

struct SynthSpec {
  // Procedural pattern id ("blobs"); ignored when base_image names a PGM.
  std::string pattern = "blobs";
  std::string base_image;
  Family family = Family::GaussianBumps;
  double max_displacement = 3.0;  // px
  int pair_count = 10;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;  // additive Gaussian intensity noise
  int height = 64;
  int width = 64;

  // Requires max_displacement < min(H,W)/8 and noise_sigma in [0, 0.1].
  void validate() const;
};

// Random registering field of the given family with max |u| <= limit.
// Translation: constant, |u| in [limit/2, limit]. Rotation: about the image
// centre, corner displacement in [limit/2, limit]. GaussianBumps: 1-3 bumps
// with sigma in [4,12] px, rescaled so that max |u| == limit.
DeformationField draw_field(Family family, double limit, int height, int width, std::mt19937_64& rng);

// Pair `index` of the set described by spec. The ground-truth field registers
// moving onto fixed; landmarks are a 3x3 interior grid on the fixed image and
// its image under the field in the moving image. Pairs depend only on
// (spec, index).
ImagePair generate_pair(const SynthSpec& spec, std::size_t index);
PairDataset generate_dataset(const SynthSpec& spec);
// Writes pair_0000 ... below out_dir (see load_dataset for the layout).
void generate_synthetic(const SynthSpec& spec, const std::string& out_dir);

}  // namespace deformreg::synth
