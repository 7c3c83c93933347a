#pragma once

#include <vector>

#include "deformreg/nd/tensor.hpp"
#include "deformreg/types.hpp"

namespace deformreg::pyramid {

// Levels ordered finest (the source image) to coarsest; each level is the
// 2x2 average pool of the previous one.
struct ImagePyramid {
  std::vector<Image2D> levels;
  int scale_count() const noexcept { return static_cast<int>(levels.size()); }
};

// Throws ShapeError when H or W is not divisible by 2^(scale_count-1); the
// message names the padded size pad_to_pyramid would produce.
ImagePyramid build_pyramid(const Image2D& image, int scale_count);

Image2D average_pool2(const Image2D& image);
// Batched 2x2 average pool over [N,C,H,W]. Not differentiable.
nd::Tensor average_pool2(const nd::Tensor& t);
// Finest-first list of scale_count tensors.
std::vector<nd::Tensor> tensor_pyramid(const nd::Tensor& t, int scale_count);

// Size restoration data for pad_to_pyramid.
struct CropRecord {
  int original_height = 0;
  int original_width = 0;
  int pad_bottom = 0;
  int pad_right = 0;
  bool empty() const noexcept { return pad_bottom == 0 && pad_right == 0; }
};

struct PaddedImage {
  Image2D image;
  CropRecord crop;
};

int padded_extent(int extent, int scale_count);

// Reflect-pads the bottom and right edges up to the next multiple of
// 2^(scale_count-1).
PaddedImage pad_to_pyramid(const Image2D& image, int scale_count);
SegMask pad_mask(const SegMask& mask, const CropRecord& crop);

Image2D crop(const Image2D& image, const CropRecord& crop);
DeformationField crop(const DeformationField& field, const CropRecord& crop);

}  // namespace deformreg::pyramid
