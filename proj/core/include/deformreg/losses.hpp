#pragma once

#include <span>
#include <vector>

#include "deformreg/nd/tape.hpp"

namespace deformreg::losses {

enum class SmoothVariant { NormalN, EdgeE };
enum class Reduction { Sum, MeanPerPixel };

const char* to_string(SmoothVariant v);
const char* to_string(Reduction r);

// Per-scale weights of the multi-scale objective, index 0 = finest scale:
//   L = sum_s alpha_s*photometric_s + beta_s*smooth_s + gamma_s*overlap_s
struct LossConfig {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;  // all zero disables the mask term
  SmoothVariant smooth = SmoothVariant::EdgeE;
  Reduction reduction = Reduction::MeanPerPixel;

  // alpha = 1, beta = 0.05 at every scale, no overlap term.
  static LossConfig defaults(int scale_count);
  int scale_count() const noexcept { return static_cast<int>(alpha.size()); }
  bool uses_masks() const;
  // Throws ConfigError on negative weights or mismatched lengths.
  void validate() const;
};

struct LossReport {
  std::vector<double> photometric;
  std::vector<double> smooth;
  std::vector<double> overlap;
  double total = 0.0;

  double weighted_total(const LossConfig& config) const;
  double photometric_sum() const;
  double smooth_sum() const;
  double overlap_sum() const;
};

// L1 distance between the warped moving and fixed images, [N,C,H,W] each.
nd::Tensor photometric_loss(nd::Tape& tape, const nd::Tensor& warped, const nd::Tensor& fixed, Reduction reduction);

// Sum of |forward difference| of both displacement components along x and y,
// over the valid region only. field is [N,2,H,W] with H,W >= 2. Mean reduction
// divides by N*H*W.
nd::Tensor smooth_n(nd::Tape& tape, const nd::Tensor& field, Reduction reduction = Reduction::Sum);

// smooth_n with each x (y) difference weighted by exp(-|x (y) difference of
// the fixed image|). The weights are constants; no gradient reaches fixed.
nd::Tensor smooth_e(nd::Tape& tape, const nd::Tensor& field, const nd::Tensor& fixed,
                    Reduction reduction = Reduction::Sum);

// L1 distance between the (unthresholded) warped moving mask and the fixed
// mask.
nd::Tensor overlap_loss(nd::Tape& tape, const nd::Tensor& warped_mask, const nd::Tensor& fixed_mask,
                        Reduction reduction = Reduction::Sum);

// Mean over pixels of sqrt(|predicted - target|^2 + 1e-16).
nd::Tensor epe_loss(nd::Tape& tape, const nd::Tensor& predicted, const nd::Tensor& target);

struct ScaleTerms {
  nd::Tensor warped;       // [N,1,H,W]
  nd::Tensor fixed;        // [N,1,H,W]
  nd::Tensor field;        // [N,2,H,W]
  nd::Tensor warped_mask;  // optional [N,1,H,W]
  nd::Tensor fixed_mask;   // optional [N,1,H,W]
};

struct LossResult {
  nd::Tensor total;
  LossReport report;
};

// Weighted multi-scale objective; scales finest first. The overlap term is
// included at scales with gamma > 0 when both masks are present.
LossResult total_loss(nd::Tape& tape, std::span<const ScaleTerms> scales, const LossConfig& config);

}  // namespace deformreg::losses
