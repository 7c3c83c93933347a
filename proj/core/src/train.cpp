#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "deformreg/engine.hpp"
#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/pyramid.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::engine {
namespace {

struct BatchTensors {
  std::vector<nd::Tensor> fixed, moving, fixed_mask, moving_mask, truth;
};

BatchTensors assemble(const PairDataset& data, std::span<const std::size_t> idx, int scales, bool masks, bool truth) {
  std::vector<const Image2D*> f, m, fm, mm;
  std::vector<const DeformationField*> t;
  std::vector<Image2D> mask_images;
  mask_images.reserve(2 * idx.size());
  for (auto i : idx) {
    const auto& p = data.pairs[i];
    f.push_back(&p.fixed);
    m.push_back(&p.moving);
    if (masks) {
      mask_images.push_back(p.fixed_mask->to_image());
      mask_images.push_back(p.moving_mask->to_image());
    }
    if (truth) t.push_back(&*p.truth);
  }
  for (std::size_t k = 0; masks && k < idx.size(); ++k) {
    fm.push_back(&mask_images[2 * k]);
    mm.push_back(&mask_images[2 * k + 1]);
  }
  BatchTensors b;
  b.fixed = pyramid::tensor_pyramid(stack_images(f), scales);
  b.moving = pyramid::tensor_pyramid(stack_images(m), scales);
  if (masks) {
    b.fixed_mask = pyramid::tensor_pyramid(stack_images(fm), scales);
    b.moving_mask = pyramid::tensor_pyramid(stack_images(mm), scales);
  }
  if (truth) {
    b.truth.push_back(stack_fields(t));
    for (int s = 1; s < scales; ++s) b.truth.push_back(warp::downsample_field(b.truth.back()));
  }
  return b;
}

}  // namespace

TrainConfig TrainConfig::defaults(TrainMode mode, int scale_count) {
  TrainConfig c;
  c.mode = mode;
  c.initial_lr = mode == TrainMode::Unsupervised ? 1e-5 : 1e-4;
  c.loss = losses::LossConfig::defaults(scale_count);
  return c;
}

double TrainConfig::lr_for_epoch(int epoch) const {
  return epoch > halve_after_epochs ? 0.5 * initial_lr : initial_lr;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("train.initial_lr must be > 0");
  if (halve_after_epochs < 0 || extra_epochs < 0 || epochs() < 1) {
    throw ConfigError("train: epoch counts must be non-negative with at least one epoch in total");
  }
  if (!(divergence_factor > 1.0)) throw ConfigError("train.divergence_factor must be > 1");
  loss.validate();
}

TrainResult train(regnet::RegModel& model, const PairDataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch, const AdamState* resume) {
  config.validate();
  if (data.empty()) throw ConfigError("train: dataset is empty");
  const bool supervised = config.mode == TrainMode::SupervisedEPE;
  data.validate(supervised);
  const int scales = model.arch.levels;
  if (config.loss.scale_count() != scales) {
    throw ConfigError("train: loss has " + std::to_string(config.loss.scale_count()) + " scales but the model has " +
                      std::to_string(scales) + " levels");
  }
  if (data.height() != model.arch.height || data.width() != model.arch.width) {
    throw ShapeError("train: dataset images are " + std::to_string(data.height()) + "x" + std::to_string(data.width()) +
                     ", model expects " + std::to_string(model.arch.height) + "x" + std::to_string(model.arch.width));
  }
  const bool masks = !supervised && config.loss.uses_masks() && data.has_masks();

  TrainResult result;
  if (resume != nullptr) {
    result.adam = *resume;
  }
  result.adam.beta1 = config.beta1;
  result.adam.beta2 = config.beta2;
  result.adam.weight_decay = config.weight_decay;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs(); ++epoch) {
    result.adam.lr = config.lr_for_epoch(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = result.adam.lr;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      const auto idx = std::span<const std::size_t>(order).subspan(start, count);
      const BatchTensors b = assemble(data, idx, scales, masks, supervised);

      nd::Tape tape;
      model.zero_grad();
      auto flows = regnet::forward(tape, model, b.fixed[0], b.moving[0]);
      nd::Tensor loss;
      if (supervised) {
        for (int s = 0; s < scales; ++s) {
          nd::Tensor e = losses::epe_loss(tape, flows[s], b.truth[s]);
          loss = loss.defined() ? nd::add(tape, loss, e) : e;
        }
        rec.total += loss.item() * static_cast<double>(count);
      } else {
        std::vector<losses::ScaleTerms> terms(static_cast<std::size_t>(scales));
        for (int s = 0; s < scales; ++s) {
          auto& t = terms[s];
          t.warped = warp::bilinear_warp(tape, b.moving[s], flows[s]);
          t.fixed = b.fixed[s];
          t.field = flows[s];
          if (masks) {
            t.warped_mask = warp::bilinear_warp(tape, b.moving_mask[s], flows[s]);
            t.fixed_mask = b.fixed_mask[s];
          }
        }
        auto lr = losses::total_loss(tape, terms, config.loss);
        loss = lr.total;
        const double w = static_cast<double>(count);
        rec.photometric += lr.report.photometric_sum() * w;
        rec.smooth += lr.report.smooth_sum() * w;
        rec.overlap += lr.report.overlap_sum() * w;
        rec.total += lr.report.total * w;
      }
      seen += count;
      if (!std::isfinite(loss.item())) {
        result.halted = true;
        result.diagnostic = "non-finite loss in epoch " + std::to_string(epoch);
        break;
      }
      tape.backward(loss);
      if (!adam_step(result.adam, model.params).applied) ++result.skipped_steps;
    }
    model.zero_grad();
    if (result.halted) break;

    const double inv = 1.0 / static_cast<double>(seen);
    rec.photometric *= inv;
    rec.smooth *= inv;
    rec.overlap *= inv;
    rec.total *= inv;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const double first = result.history.front().total;
    if (epoch > 1 && rec.total > config.divergence_factor * first) {
      result.halted = true;
      std::ostringstream os;
      os << "training diverged: epoch " << epoch << " mean loss " << rec.total << " exceeds "
         << config.divergence_factor << "x the epoch-1 mean " << first;
      result.diagnostic = os.str();
      break;
    }
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << "epoch,lr,photometric,smooth,overlap,total\n";
  f << std::setprecision(9);
  for (const auto& r : history) {
    f << r.epoch << ',' << r.lr << ',' << r.photometric << ',' << r.smooth << ',' << r.overlap << ',' << r.total << '\n';
  }
  if (!f) throw Error("write to '" + path + "' failed");
}

}  // namespace deformreg::engine
