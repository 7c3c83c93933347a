#pragma once

#include "deformreg/nd/tape.hpp"
#include "deformreg/types.hpp"

namespace deformreg::warp {

// Differentiable spatial-transformer sampling:
//   out[n,c,y,x] = bilinear(moving[n,c], x + field[n,0,y,x], y + field[n,1,y,x])
// Sample coordinates are clamped to the image (clamp-to-edge). moving is
// [N,C,H,W] and field [N,2,H,W]; gradients flow into both.
nd::Tensor bilinear_warp(nd::Tape& tape, const nd::Tensor& moving, const nd::Tensor& field);

Image2D bilinear_warp(const Image2D& moving, const DeformationField& field);

// Bilinear warp followed by a 0.5 threshold. Evaluation only.
SegMask warp_mask(const SegMask& mask, const DeformationField& field);

// Factor-2 bilinear upsampling (pixel-centre aligned, clamped at the borders)
// with displacements doubled to stay in pixel units of the finer grid.
nd::Tensor upsample_field(nd::Tape& tape, const nd::Tensor& field);
DeformationField upsample_field(const DeformationField& field);

// 2x2 average with displacements halved; the inverse of upsample_field on
// smooth fields. Not differentiable.
nd::Tensor downsample_field(const nd::Tensor& field);
DeformationField downsample_field(const DeformationField& field);

struct InversionResult {
  DeformationField inverse;
  int iterations = 0;
  double last_update = 0.0;  // max |v_k+1 - v_k| in px
  double residual = 0.0;     // max |u(x + v(x)) + v(x)| in px
  bool converged = false;
};

// Fixed-point inversion v <- -u(x + v(x)) starting from v = 0. Stops after
// max_iterations or once the largest update falls below tolerance. A result
// is always returned; callers inspect `converged` and `residual`.
InversionResult invert_field(const DeformationField& field, int max_iterations = 20, double tolerance = 1e-3);

// Maps moving-image landmarks into the warped (fixed-grid) image: the point p
// moves to p + v(p) where v is the inverse of field.
LandmarkSet apply_to_landmarks(const LandmarkSet& moving_points, const DeformationField& field);
LandmarkSet apply_to_landmarks(const LandmarkSet& moving_points, const InversionResult& inverse);

}  // namespace deformreg::warp
