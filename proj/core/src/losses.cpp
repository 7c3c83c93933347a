#include "deformreg/losses.hpp"

#include <cmath>

#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"

namespace deformreg::losses {
namespace {

constexpr double kEpeStabilitySq = 1e-16;  // (1e-8)^2

void require_same(const char* op, const nd::Tensor& a, const nd::Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + nd::shape_str(a.shape()) + " vs " +
                     nd::shape_str(b.shape()));
  }
}

void require_field(const char* op, const nd::Tensor& field) {
  if (field.rank() != 4 || field.dim(1) != 2) {
    throw ShapeError(std::string(op) + ": field must be [N,2,H,W], got " + nd::shape_str(field.shape()));
  }
  if (field.dim(2) < 2 || field.dim(3) < 2) {
    throw ShapeError(std::string(op) + ": field needs H,W >= 2, got " + nd::shape_str(field.shape()));
  }
}

nd::Tensor reduce(nd::Tape& tape, const nd::Tensor& terms, Reduction reduction, std::int64_t pixel_count) {
  nd::Tensor s = nd::reduce_sum(tape, terms);
  if (reduction == Reduction::Sum) return s;
  return nd::scalar_mul(tape, s, static_cast<float>(1.0 / static_cast<double>(pixel_count)));
}

// exp(-|forward difference of fixed|), replicated over both field channels.
nd::Tensor edge_weights(const nd::Tensor& fixed, bool along_x) {
  nd::Tape none(false);
  nd::Tensor d = along_x ? nd::diff_x(none, fixed) : nd::diff_y(none, fixed);
  nd::Tensor wt = nd::exp_neg(none, nd::abs(none, d));
  const auto n = wt.dim(0), plane = wt.dim(2) * wt.dim(3);
  std::vector<float> rep(static_cast<std::size_t>(n * 2 * plane));
  auto src = wt.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < 2; ++c)
      std::copy_n(src.begin() + b * plane, plane, rep.begin() + (b * 2 + c) * plane);
  return nd::Tensor::from_data({n, 2, wt.dim(2), wt.dim(3)}, std::move(rep));
}

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

const char* to_string(SmoothVariant v) { return v == SmoothVariant::NormalN ? "normal" : "edge"; }
const char* to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

LossConfig LossConfig::defaults(int scale_count) {
  LossConfig c;
  c.alpha.assign(static_cast<std::size_t>(scale_count), 1.0);
  c.beta.assign(static_cast<std::size_t>(scale_count), 0.05);
  c.gamma.assign(static_cast<std::size_t>(scale_count), 0.0);
  return c;
}

bool LossConfig::uses_masks() const {
  for (double g : gamma)
    if (g > 0.0) return true;
  return false;
}

void LossConfig::validate() const {
  if (alpha.empty()) throw ConfigError("loss: at least one scale is required");
  if (beta.size() != alpha.size() || gamma.size() != alpha.size()) {
    throw ConfigError("loss: alpha, beta and gamma must have one entry per scale (" + std::to_string(alpha.size()) +
                      ", " + std::to_string(beta.size()) + ", " + std::to_string(gamma.size()) + ")");
  }
  for (const auto* v : {&alpha, &beta, &gamma})
    for (double w : *v)
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss: weights must be finite and >= 0");
}

double LossReport::weighted_total(const LossConfig& config) const {
  double t = 0.0;
  for (std::size_t s = 0; s < photometric.size(); ++s) {
    t += config.alpha[s] * photometric[s] + config.beta[s] * smooth[s];
    if (s < overlap.size()) t += config.gamma[s] * overlap[s];
  }
  return t;
}

double LossReport::photometric_sum() const { return sum_of(photometric); }
double LossReport::smooth_sum() const { return sum_of(smooth); }
double LossReport::overlap_sum() const { return sum_of(overlap); }

nd::Tensor photometric_loss(nd::Tape& tape, const nd::Tensor& warped, const nd::Tensor& fixed, Reduction reduction) {
  require_same("photometric_loss", warped, fixed);
  return reduce(tape, nd::abs(tape, nd::sub(tape, warped, fixed)), reduction, warped.numel());
}

nd::Tensor overlap_loss(nd::Tape& tape, const nd::Tensor& warped_mask, const nd::Tensor& fixed_mask,
                        Reduction reduction) {
  require_same("overlap_loss", warped_mask, fixed_mask);
  return reduce(tape, nd::abs(tape, nd::sub(tape, warped_mask, fixed_mask)), reduction, warped_mask.numel());
}

nd::Tensor smooth_n(nd::Tape& tape, const nd::Tensor& field, Reduction reduction) {
  require_field("smooth_n", field);
  nd::Tensor gx = nd::abs(tape, nd::diff_x(tape, field));
  nd::Tensor gy = nd::abs(tape, nd::diff_y(tape, field));
  nd::Tensor s = nd::add(tape, nd::reduce_sum(tape, gx), nd::reduce_sum(tape, gy));
  if (reduction == Reduction::Sum) return s;
  return nd::scalar_mul(tape, s, static_cast<float>(1.0 / static_cast<double>(field.dim(0) * field.dim(2) * field.dim(3))));
}

nd::Tensor smooth_e(nd::Tape& tape, const nd::Tensor& field, const nd::Tensor& fixed, Reduction reduction) {
  require_field("smooth_e", field);
  if (fixed.rank() != 4 || fixed.dim(1) != 1 || fixed.dim(0) != field.dim(0) || fixed.dim(2) != field.dim(2) ||
      fixed.dim(3) != field.dim(3)) {
    throw ShapeError("smooth_e: fixed " + nd::shape_str(fixed.shape()) + " not aligned with field " +
                     nd::shape_str(field.shape()));
  }
  nd::Tensor gx = nd::mul(tape, nd::abs(tape, nd::diff_x(tape, field)), edge_weights(fixed, true));
  nd::Tensor gy = nd::mul(tape, nd::abs(tape, nd::diff_y(tape, field)), edge_weights(fixed, false));
  nd::Tensor s = nd::add(tape, nd::reduce_sum(tape, gx), nd::reduce_sum(tape, gy));
  if (reduction == Reduction::Sum) return s;
  return nd::scalar_mul(tape, s, static_cast<float>(1.0 / static_cast<double>(field.dim(0) * field.dim(2) * field.dim(3))));
}

nd::Tensor epe_loss(nd::Tape& tape, const nd::Tensor& predicted, const nd::Tensor& target) {
  require_same("epe_loss", predicted, target);
  if (predicted.rank() != 4 || predicted.dim(1) != 2) {
    throw ShapeError("epe_loss: fields must be [N,2,H,W], got " + nd::shape_str(predicted.shape()));
  }
  const auto n = predicted.dim(0), plane = predicted.dim(2) * predicted.dim(3);
  const auto count = n * plane;
  auto p = predicted.data();
  auto t = target.data();
  std::vector<double> norms(static_cast<std::size_t>(count));
  double acc = 0.0;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < plane; ++i) {
      const auto ix = b * 2 * plane + i, iy = ix + plane;
      const double ex = double(p[ix]) - t[ix], ey = double(p[iy]) - t[iy];
      const double r = std::sqrt(ex * ex + ey * ey + kEpeStabilitySq);
      norms[static_cast<std::size_t>(b * plane + i)] = r;
      acc += r;
    }
  nd::Tensor out = nd::Tensor::scalar(static_cast<float>(acc / static_cast<double>(count)));
  if (tape.tracks({&predicted, &target})) {
    tape.record("epe_loss", out, [predicted, target, out, norms = std::move(norms), n, plane, count]() mutable {
      const double g = out.grad()[0] / static_cast<double>(count);
      auto p = predicted.data();
      auto t = target.data();
      std::span<float> gp = predicted.requires_grad() ? predicted.grad_buffer() : std::span<float>{};
      std::span<float> gt = target.requires_grad() ? target.grad_buffer() : std::span<float>{};
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t i = 0; i < plane; ++i) {
          const auto ix = b * 2 * plane + i, iy = ix + plane;
          const double r = norms[static_cast<std::size_t>(b * plane + i)];
          const double cx = g * (double(p[ix]) - t[ix]) / r, cy = g * (double(p[iy]) - t[iy]) / r;
          if (!gp.empty()) {
            gp[ix] += static_cast<float>(cx);
            gp[iy] += static_cast<float>(cy);
          }
          if (!gt.empty()) {
            gt[ix] -= static_cast<float>(cx);
            gt[iy] -= static_cast<float>(cy);
          }
        }
    });
  }
  return out;
}

LossResult total_loss(nd::Tape& tape, std::span<const ScaleTerms> scales, const LossConfig& config) {
  config.validate();
  if (static_cast<int>(scales.size()) != config.scale_count()) {
    throw ShapeError("total_loss: " + std::to_string(scales.size()) + " scales supplied, config has " +
                     std::to_string(config.scale_count()));
  }
  LossResult r;
  nd::Tensor total;
  auto accumulate = [&](const nd::Tensor& term, double weight) {
    if (weight == 0.0) return;
    nd::Tensor t = nd::scalar_mul(tape, term, static_cast<float>(weight));
    total = total.defined() ? nd::add(tape, total, t) : t;
  };
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const auto& in = scales[s];
    nd::Tensor photo = photometric_loss(tape, in.warped, in.fixed, config.reduction);
    nd::Tensor smooth = config.smooth == SmoothVariant::EdgeE ? smooth_e(tape, in.field, in.fixed, config.reduction)
                                                              : smooth_n(tape, in.field, config.reduction);
    r.report.photometric.push_back(photo.item());
    r.report.smooth.push_back(smooth.item());
    accumulate(photo, config.alpha[s]);
    accumulate(smooth, config.beta[s]);
    if (config.gamma[s] > 0.0 && in.warped_mask.defined() && in.fixed_mask.defined()) {
      nd::Tensor ov = overlap_loss(tape, in.warped_mask, in.fixed_mask, config.reduction);
      r.report.overlap.push_back(ov.item());
      accumulate(ov, config.gamma[s]);
    } else {
      r.report.overlap.push_back(0.0);
    }
  }
  if (!total.defined()) total = nd::Tensor::scalar(0.0f);
  r.total = total;
  r.report.total = r.report.weighted_total(config);
  return r;
}

}  // namespace deformreg::losses
