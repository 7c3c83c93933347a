#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deformreg/dataset.hpp"
#include "deformreg/losses.hpp"
#include "deformreg/regnet.hpp"

namespace deformreg::engine {

// Adam with decoupled weight decay:
//   p -= lr*wd*p;  m,v updated;  p -= lr * m_hat / (sqrt(v_hat) + eps)
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  std::int64_t step_count = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  // Checkpoint blocks: "adam.hyper" plus "adam.m/<name>", "adam.v/<name>".
  std::vector<regnet::NamedTensor> to_blocks(const std::vector<regnet::NamedTensor>& params) const;
  static std::optional<AdamState> from_blocks(const std::vector<regnet::NamedTensor>& blocks,
                                              const std::vector<regnet::NamedTensor>& params);
};

struct AdamStepResult {
  bool applied = true;
  std::vector<std::string> non_finite;  // parameters whose gradient held NaN/Inf
};

// Updates every parameter from its gradient buffer (a missing buffer counts
// as zero). A non-finite gradient anywhere skips the whole step and is logged.
AdamStepResult adam_step(AdamState& state, std::vector<regnet::NamedTensor>& params);

enum class TrainMode { Unsupervised, SupervisedEPE };

struct TrainConfig {
  int batch_size = 8;
  double initial_lr = 1e-5;
  int halve_after_epochs = 10;
  int extra_epochs = 7;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 5e-4;
  double divergence_factor = 10.0;
  TrainMode mode = TrainMode::Unsupervised;
  losses::LossConfig loss = losses::LossConfig::defaults(4);

  // lr 1e-5 (unsupervised) or 1e-4 (supervised); halve after 10 epochs and
  // train 7 more.
  static TrainConfig defaults(TrainMode mode, int scale_count);
  int epochs() const noexcept { return halve_after_epochs + extra_epochs; }
  double lr_for_epoch(int epoch) const;  // 1-based
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double photometric = 0.0;
  double smooth = 0.0;
  double overlap = 0.0;
  double total = 0.0;  // EPE sum over scales in supervised mode
};

struct TrainResult {
  std::vector<EpochRecord> history;
  AdamState adam;
  bool halted = false;
  std::string diagnostic;
  std::size_t skipped_steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training from the model's current parameters. Unsupervised mode
// minimises the multi-scale photometric + smoothness (+ overlap) objective;
// supervised mode the sum over scales of the EPE against the downsampled
// ground truth.
TrainResult train(regnet::RegModel& model, const PairDataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {}, const AdamState* resume = nullptr);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

struct OptimizeConfig {
  losses::LossConfig loss = losses::LossConfig::defaults(4);
  std::vector<int> iterations;  // per scale, finest first; empty = 200 each
  double lr = 0.1;
  double divergence_factor = 10.0;

  int scale_count() const noexcept { return loss.scale_count(); }
  int iterations_at(int scale) const;
};

struct LevelTrace {
  int scale = 0;  // 0 = finest
  int iterations = 0;
  double start_loss = 0.0;
  double end_loss = 0.0;
  std::vector<double> history;  // loss of every scored iterate, start included
};

struct OptimizeResult {
  DeformationField field;
  losses::LossReport report;  // end-of-level terms per scale
  std::vector<LevelTrace> levels;  // in processing order, coarsest first
};

// Direct per-pair optimisation of the field, coarse to fine. Each level
// starts from the upsampled result of the previous one and keeps the best
// iterate, so a level never ends above its starting loss. Within a level the
// Adam step decays from lr to 0 along a half cosine. Throws NumericalError on a
// non-finite loss or when a level's final iterate ends above
// divergence_factor times its starting loss.
OptimizeResult optimize_field(const Image2D& fixed, const Image2D& moving, const OptimizeConfig& config,
                              const SegMask* fixed_mask = nullptr, const SegMask* moving_mask = nullptr);

struct RegisterResult {
  DeformationField field;
  Image2D warped;
  double runtime_s = 0.0;
};

// One forward pass; only the finest field is used. Inputs smaller than the
// architecture are reflect-padded when that makes them fit.
RegisterResult register_pair(const regnet::RegModel& model, const Image2D& fixed, const Image2D& moving);

}  // namespace deformreg::engine
