#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deformreg/types.hpp"

namespace deformreg {

// One registration problem. `truth` is the field that registers moving onto
// fixed: bilinear_warp(moving, truth) ~ fixed.
struct ImagePair {
  std::string id;
  Image2D fixed;
  Image2D moving;
  std::optional<SegMask> fixed_mask;
  std::optional<SegMask> moving_mask;
  std::optional<DeformationField> truth;
  std::optional<LandmarkSet> fixed_landmarks;
  std::optional<LandmarkSet> moving_landmarks;
};

struct PairDataset {
  std::vector<ImagePair> pairs;

  bool empty() const noexcept { return pairs.empty(); }
  std::size_t size() const noexcept { return pairs.size(); }
  int height() const { return pairs.empty() ? 0 : pairs.front().fixed.height(); }
  int width() const { return pairs.empty() ? 0 : pairs.front().fixed.width(); }
  bool has_masks() const;
  // Throws ShapeError/ConfigError when pairs differ in size, annotations do
  // not match their images, or ground truth is missing where required.
  void validate(bool require_truth) const;
};

// Directory layout written by the synthetic generator:
//   <dir>/pair_NNNN/{fixed,moving}.pgm, truth.dff, {fixed,moving}_mask.pgm,
//   {fixed,moving}_landmarks.csv
// Optional files may be absent. Pairs are read in lexicographic order.
PairDataset load_dataset(const std::string& dir);
void save_pair(const std::string& dir, const ImagePair& pair);

}  // namespace deformreg
