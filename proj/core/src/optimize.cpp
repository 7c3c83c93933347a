#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "deformreg/engine.hpp"
#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/pyramid.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::engine {
namespace {

constexpr int kDefaultIterations = 200;

losses::LossConfig single_scale(const losses::LossConfig& cfg, int s) {
  losses::LossConfig one = cfg;
  one.alpha = {cfg.alpha[s]};
  one.beta = {cfg.beta[s]};
  one.gamma = {cfg.gamma[s]};
  return one;
}

struct LevelInputs {
  nd::Tensor fixed, moving, fixed_mask, moving_mask;
};

losses::LossResult level_loss(nd::Tape& tape, const LevelInputs& in, const nd::Tensor& field,
                              const losses::LossConfig& cfg) {
  losses::ScaleTerms t;
  t.warped = warp::bilinear_warp(tape, in.moving, field);
  t.fixed = in.fixed;
  t.field = field;
  if (in.moving_mask.defined()) {
    t.warped_mask = warp::bilinear_warp(tape, in.moving_mask, field);
    t.fixed_mask = in.fixed_mask;
  }
  return losses::total_loss(tape, std::span<const losses::ScaleTerms>(&t, 1), cfg);
}

}  // namespace

int OptimizeConfig::iterations_at(int scale) const {
  if (iterations.empty()) return kDefaultIterations;
  return iterations.at(static_cast<std::size_t>(scale));
}

OptimizeResult optimize_field(const Image2D& fixed, const Image2D& moving, const OptimizeConfig& config,
                              const SegMask* fixed_mask, const SegMask* moving_mask) {
  config.loss.validate();
  const int scales = config.scale_count();
  if (!config.iterations.empty() && static_cast<int>(config.iterations.size()) != scales) {
    throw ConfigError("optimize: iterations must list one count per scale");
  }
  if (fixed.height() != moving.height() || fixed.width() != moving.width()) {
    throw ShapeError("optimize: fixed and moving images differ in size");
  }
  const bool masks = config.loss.uses_masks() && fixed_mask != nullptr && moving_mask != nullptr;

  const auto fp = pyramid::build_pyramid(fixed, scales);
  const auto mp = pyramid::build_pyramid(moving, scales);
  std::vector<nd::Tensor> fmask, mmask;
  if (masks) {
    fmask = pyramid::tensor_pyramid(to_tensor(fixed_mask->to_image()), scales);
    mmask = pyramid::tensor_pyramid(to_tensor(moving_mask->to_image()), scales);
  }

  OptimizeResult result;
  result.report.photometric.assign(scales, 0.0);
  result.report.smooth.assign(scales, 0.0);
  result.report.overlap.assign(scales, 0.0);

  const auto& coarsest = fp.levels.back();
  nd::Tensor field = nd::Tensor::zeros({1, 2, coarsest.height(), coarsest.width()});

  for (int s = scales - 1; s >= 0; --s) {
    LevelInputs in{to_tensor(fp.levels[s]), to_tensor(mp.levels[s]), {}, {}};
    if (masks) {
      in.fixed_mask = fmask[s];
      in.moving_mask = mmask[s];
    }
    const auto cfg = single_scale(config.loss, s);

    AdamState adam;
    adam.lr = config.lr;
    adam.weight_decay = 0.0;
    std::vector<regnet::NamedTensor> param{{"field", field.detach()}};
    param[0].value.set_requires_grad(true);

    LevelTrace trace;
    trace.scale = s;
    nd::Tensor best = param[0].value.detach();
    losses::LossReport best_report;
    double best_loss = 0.0;

    const int iters = config.iterations_at(s);
    for (int it = 0; it <= iters; ++it) {
      nd::Tape tape;
      param[0].value.release_grad();
      auto lr = level_loss(tape, in, param[0].value, cfg);
      const double loss = lr.total.item();
      if (!std::isfinite(loss)) throw NumericalError("optimize: non-finite loss at scale " + std::to_string(s));
      trace.history.push_back(loss);
      if (it == 0) {
        trace.start_loss = loss;
        best_loss = loss;
        best_report = lr.report;
      } else if (loss < best_loss) {
        best_loss = loss;
        best_report = lr.report;
        best = param[0].value.detach();
      }
      if (it == iters) break;  // last pass only scores the final iterate
      tape.backward(lr.total);
      adam.lr = config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * it / iters));
      adam_step(adam, param);
      trace.iterations = it + 1;
    }
    // Early Adam steps may overshoot transiently; only a level that ends far
    // above where it started counts as diverged.
    if (trace.history.back() > config.divergence_factor * std::max(trace.start_loss, 1e-6)) {
      std::ostringstream os;
      os << "optimize diverged at scale " << s << ": final loss " << trace.history.back() << " > "
         << config.divergence_factor << "x start " << trace.start_loss;
      throw NumericalError(os.str());
    }
    trace.end_loss = best_loss;
    result.levels.push_back(trace);
    result.report.photometric[s] = best_report.photometric.at(0);
    result.report.smooth[s] = best_report.smooth.at(0);
    result.report.overlap[s] = best_report.overlap.at(0);

    if (s > 0) {
      nd::Tape none(false);
      field = warp::upsample_field(none, best);
    } else {
      field = best;
    }
  }
  result.report.total = result.report.weighted_total(config.loss);
  result.field = field_from_tensor(field);
  return result;
}

}  // namespace deformreg::engine
