// Acceptance runner: one PASS/FAIL line per criterion. Run all criteria with no
// arguments, or a subset by number (e.g. `acceptance 1 6 7`).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "deformreg/dataset.hpp"
#include "deformreg/engine.hpp"
#include "deformreg/eval.hpp"
#include "deformreg/io.hpp"
#include "deformreg/losses.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/pyramid.hpp"
#include "deformreg/regnet.hpp"
#include "deformreg/synth.hpp"
#include "deformreg/warp.hpp"
#include "support.hpp"

using namespace deformreg;
using deformreg::testing::check_gradient;
using deformreg::testing::random_tensor;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double mean_abs_diff(const Image2D& a, const Image2D& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a.pixels()[i] - b.pixels()[i]);
  return acc / static_cast<double>(a.size());
}

// Mean endpoint error over the central 75% of the image (1/8 margin per side).
double central_epe(const DeformationField& f, const DeformationField& truth) {
  const int my = f.height() / 8, mx = f.width() / 8;
  double acc = 0;
  int n = 0;
  for (int y = my; y < f.height() - my; ++y)
    for (int x = mx; x < f.width() - mx; ++x, ++n)
      acc += std::hypot(f.dx(y, x) - truth.dx(y, x), f.dy(y, x) - truth.dy(y, x));
  return acc / n;
}

// ---------------------------------------------------------------- criterion 1

Outcome gradient_integrity() {
  Outcome o;
  const double kink = 1e-3 + 1e-4;
  double worst = 0;
  int checked = 0;
  auto run = [&](const std::string& name, const std::function<nd::Tensor(nd::Tape&)>& loss, const nd::Tensor& x,
                 const std::function<bool(std::size_t)>& skip = {}, std::size_t max_entries = 0) {
    const auto r = check_gradient(loss, x, 1e-3, 1e-3, 1e-2, skip, max_entries);
    worst = std::max(worst, r.max_violation);
    if (std::getenv("ACCEPTANCE_VERBOSE")) std::fprintf(stderr, "  %s %.3f\n", name.c_str(), r.max_violation);
    checked += r.checked;
    o.require(r.max_violation <= 1.0, name + " violation " + std::to_string(r.max_violation));
  };
  auto near_zero = [kink](const nd::Tensor& t) { return [t, kink](std::size_t i) { return std::fabs(t.at(i)) < kink; }; };
  const auto t0 = Clock::now();

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    nd::Tensor x = random_tensor({2, 3, 6, 5}, seed);
    nd::Tensor y = random_tensor({2, 3, 6, 5}, seed + 100);
    nd::Tensor w = random_tensor({2, 3, 6, 5}, seed + 200, -1, 1, false);
    auto dot = [&](nd::Tape& t, const nd::Tensor& v) { return nd::reduce_sum(t, nd::mul(t, v, w)); };

    nd::Tensor xs = random_tensor({1, 3, 5, 4}, seed + 300);
    nd::Tensor k = random_tensor({4, 3, 3, 3}, seed + 1), b = random_tensor({4}, seed + 2);
    auto conv = [&](nd::Tape& t) {
      nd::Tensor out = nd::conv2d(t, xs, k, b, 1, 1);
      return nd::reduce_sum(t, nd::mul(t, out, random_tensor(out.shape(), 9, -1, 1, false)));
    };
    run("conv2d/input", conv, xs);
    run("conv2d/weight", conv, k);
    run("conv2d/bias", conv, b);
    nd::Tensor k4 = random_tensor({2, 3, 4, 4}, seed + 3), b2 = random_tensor({2}, seed + 4);
    auto down = [&](nd::Tape& t) {
      nd::Tensor out = nd::conv2d(t, xs, k4, b2, 2, 1);
      return nd::reduce_sum(t, nd::mul(t, out, random_tensor(out.shape(), 10, -1, 1, false)));
    };
    run("conv2d_s2/input", down, xs);
    run("conv2d_s2/weight", down, k4);
    nd::Tensor kt = random_tensor({3, 2, 4, 4}, seed + 5);
    auto up = [&](nd::Tape& t) {
      nd::Tensor out = nd::conv2d_transpose(t, xs, kt, b2, 2, 1);
      return nd::reduce_sum(t, nd::mul(t, out, random_tensor(out.shape(), 11, -1, 1, false)));
    };
    run("conv2d_transpose/input", up, xs);
    run("conv2d_transpose/weight", up, kt);
    run("conv2d_transpose/bias", up, b2);

    run("leaky_relu", [&](nd::Tape& t) { return dot(t, nd::leaky_relu(t, x, 0.1f)); }, x, near_zero(x));
    run("abs", [&](nd::Tape& t) { return dot(t, nd::abs(t, x)); }, x, near_zero(x));
    run("exp_neg", [&](nd::Tape& t) { return dot(t, nd::exp_neg(t, nd::abs(t, x))); }, x, near_zero(x));
    run("add", [&](nd::Tape& t) { return dot(t, nd::add(t, x, y)); }, y);
    run("sub", [&](nd::Tape& t) { return dot(t, nd::sub(t, x, y)); }, y);
    run("mul", [&](nd::Tape& t) { return dot(t, nd::mul(t, x, y)); }, x);
    run("scalar_mul", [&](nd::Tape& t) { return dot(t, nd::scalar_mul(t, x, -2.5f)); }, x);
    run("reduce_mean", [&](nd::Tape& t) { return nd::reduce_mean(t, nd::mul(t, x, x)); }, x);
    run("concat", [&](nd::Tape& t) {
      nd::Tensor c = nd::concat_channels(t, x, y);
      return nd::reduce_sum(t, nd::mul(t, c, random_tensor(c.shape(), 12, -1, 1, false)));
    }, y);
    run("diff_x", [&](nd::Tape& t) {
      nd::Tensor d = nd::diff_x(t, x);
      return nd::reduce_sum(t, nd::mul(t, d, random_tensor(d.shape(), 13, -1, 1, false)));
    }, x);
    run("diff_y", [&](nd::Tape& t) {
      nd::Tensor d = nd::diff_y(t, x);
      return nd::reduce_sum(t, nd::mul(t, d, random_tensor(d.shape(), 14, -1, 1, false)));
    }, x);

    nd::Tensor img = random_tensor({1, 1, 7, 6}, seed + 20, 0, 1);
    nd::Tensor fld = random_tensor({1, 2, 7, 6}, seed + 21, -2.5f, 2.5f);
    nd::Tensor fixed = random_tensor({1, 1, 7, 6}, seed + 22, 0, 1, false);
    auto warp_loss = [&](nd::Tape& t) {
      nd::Tensor wv = warp::bilinear_warp(t, img, fld);
      return nd::reduce_sum(t, nd::mul(t, wv, random_tensor(wv.shape(), 15, -1, 1, false)));
    };
    auto on_grid_line = [&](std::size_t i) {
      const std::size_t p = i % 42;
      const double pos = (i < 42 ? p % 6 : p / 6) + fld.at(i);
      const double frac = pos - std::floor(pos);
      return std::min(frac, 1.0 - frac) < kink;
    };
    run("bilinear_warp/field", warp_loss, fld, on_grid_line);
    run("bilinear_warp/moving", warp_loss, img);
    run("upsample_field", [&](nd::Tape& t) {
      nd::Tensor u = warp::upsample_field(t, fld);
      return nd::reduce_sum(t, nd::mul(t, u, random_tensor(u.shape(), 16, -1, 1, false)));
    }, fld);

    nd::Tensor small = random_tensor({1, 2, 7, 6}, seed + 23, -0.5f, 0.5f);
    auto neighbour_kink = [&](std::size_t i) {
      const std::int64_t xx = i % 6, yy = (i / 6) % 7;
      for (auto [dy, dx] : {std::pair{0, 1}, {0, -1}, {1, 0}, {-1, 0}}) {
        if (yy + dy < 0 || yy + dy >= 7 || xx + dx < 0 || xx + dx >= 6) continue;
        if (std::fabs(small.at(i + dy * 6 + dx) - small.at(i)) < 2 * kink) return true;
      }
      return false;
    };
    using losses::Reduction;
    run("smooth_n", [&](nd::Tape& t) { return losses::smooth_n(t, small, Reduction::MeanPerPixel); }, small,
        neighbour_kink);
    run("smooth_e", [&](nd::Tape& t) { return losses::smooth_e(t, small, fixed, Reduction::MeanPerPixel); }, small,
        neighbour_kink);
    auto diff_kink = [&](std::size_t i) { return std::fabs(img.at(i) - fixed.at(i)) < kink; };
    run("photometric", [&](nd::Tape& t) { return losses::photometric_loss(t, img, fixed, Reduction::MeanPerPixel); },
        img, diff_kink);
    run("overlap", [&](nd::Tape& t) { return losses::overlap_loss(t, img, fixed, Reduction::MeanPerPixel); }, img,
        diff_kink);
    run("epe", [&](nd::Tape& t) { return losses::epe_loss(t, fld, small); }, fld);
  }

  // Composed pipeline: regnet forward -> warp -> total_loss at 16x16, levels=2.
  regnet::ArchConfig arch{.levels = 2, .base_channels = 8, .height = 16, .width = 16};
  auto model = regnet::init_model(arch, 3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-0.05f, 0.05f);
  for (auto& p : model.params)
    if (p.name.rfind("flow", 0) == 0)
      for (float& v : p.value.mutable_data()) v = u(rng);
  const nd::Tensor fixed = random_tensor({2, 1, 16, 16}, 31, 0, 1, false);
  const nd::Tensor moving = random_tensor({2, 1, 16, 16}, 32, 0, 1, false);
  const auto fp = pyramid::tensor_pyramid(fixed, 2), mp = pyramid::tensor_pyramid(moving, 2);
  const auto cfg = losses::LossConfig::defaults(2);
  auto pipeline = [&](nd::Tape& t) {
    const auto flows = regnet::forward(t, model, fixed, moving);
    std::vector<losses::ScaleTerms> terms;
    for (int s = 0; s < 2; ++s) terms.push_back({warp::bilinear_warp(t, mp[s], flows[s]), fp[s], flows[s], {}, {}});
    return losses::total_loss(t, terms, cfg).total;
  };
  for (const auto& p : model.params) run("pipeline/" + p.name, pipeline, p.value, {}, 12);

  const double secs = seconds_since(t0);
  o.require(secs < 120, "runtime");
  o.detail << "entries " << checked << ", worst violation " << worst << ", " << secs << " s";
  return o;
}

// ---------------------------------------------------------------- criterion 2

Outcome identity_suite() {
  Outcome o;
  synth::SynthSpec spec;
  spec.pair_count = 3;
  spec.max_displacement = 3;
  for (const auto& p : synth::generate_dataset(spec).pairs) {
    o.require(warp::bilinear_warp(p.moving, DeformationField(64, 64)) == p.moving, "zero-field warp");
    o.require(warp::warp_mask(*p.moving_mask, DeformationField(64, 64)) == *p.moving_mask, "zero-field mask warp");

    nd::Tape tape(false);
    const nd::Tensor img = to_tensor(p.fixed), mask = to_tensor(p.fixed_mask->to_image());
    const nd::Tensor zero = nd::Tensor::zeros({1, 2, 64, 64});
    for (auto red : {losses::Reduction::Sum, losses::Reduction::MeanPerPixel}) {
      o.require(std::fabs(losses::photometric_loss(tape, img, img, red).item()) <= 1e-8, "photometric");
      o.require(std::fabs(losses::smooth_n(tape, zero, red).item()) <= 1e-8, "smooth_n");
      o.require(std::fabs(losses::smooth_e(tape, zero, img, red).item()) <= 1e-8, "smooth_e");
      o.require(std::fabs(losses::overlap_loss(tape, mask, mask, red).item()) <= 1e-8, "overlap");
    }
    o.require(std::fabs(losses::epe_loss(tape, zero, zero).item()) <= 1e-8, "epe");
    const auto terms = std::vector<losses::ScaleTerms>{{img, img, zero, mask, mask}};
    auto cfg = losses::LossConfig::defaults(1);
    cfg.gamma[0] = 1;
    o.require(std::fabs(losses::total_loss(tape, terms, cfg).total.item()) <= 1e-8, "total_loss");

    const auto model = regnet::init_model(regnet::ArchConfig{}, 1);
    const auto r = engine::register_pair(model, p.fixed, p.moving);
    o.require(r.warped == p.moving && r.field.max_magnitude() == 0.0, "init registration");
  }
  o.detail << "3 pairs";
  return o;
}

// ---------------------------------------------------------------- criterion 3

struct OptimizeStats {
  double epe = 0, reduction = 0;
};

OptimizeStats optimizer_recovery(const PairDataset& data, double beta) {
  engine::OptimizeConfig cfg;
  cfg.loss.beta.assign(4, beta);
  double epe = 0, before = 0, after = 0;
  for (const auto& p : data.pairs) {
    const auto r = engine::optimize_field(p.fixed, p.moving, cfg);
    epe += central_epe(r.field, *p.truth);
    before += mean_abs_diff(p.moving, p.fixed);
    after += mean_abs_diff(warp::bilinear_warp(p.moving, r.field), p.fixed);
  }
  return {epe / static_cast<double>(data.size()), 1.0 - after / before};
}

Outcome direct_optimizer() {
  Outcome o;
  const auto t0 = Clock::now();
  synth::SynthSpec spec;
  spec.family = synth::Family::GaussianBumps;
  spec.max_displacement = 4;
  spec.pair_count = 20;
  spec.seed = 303;
  const auto data = synth::generate_dataset(spec);
  const auto tuned = optimizer_recovery(data, 0.01);
  const double secs = seconds_since(t0);
  o.require(tuned.epe < 1.0, "EPE");
  o.require(tuned.reduction >= 0.90, "photometric reduction");
  o.require(secs < 600, "runtime");
  const auto stock = optimizer_recovery(data, 0.05);
  o.detail << "beta 0.01: EPE " << tuned.epe << " px, reduction " << 100 * tuned.reduction << "%, " << secs
           << " s (info, beta 0.05: EPE " << stock.epe << " px, reduction " << 100 * stock.reduction << "%)";
  return o;
}

// ------------------------------------------------------------ criteria 4 and 5

struct TrainedEval {
  double dist_before = 0, dist_after = 0, jacc_before = 0, jacc_after = 0, epe = 0, seconds = 0;
};

TrainedEval train_and_evaluate(engine::TrainMode mode) {
  synth::SynthSpec spec;
  spec.family = synth::Family::Translation;
  spec.max_displacement = 4;
  spec.pair_count = 200;
  spec.seed = 101;
  const auto train_set = synth::generate_dataset(spec);
  spec.pair_count = 40;
  spec.seed = 202;
  const auto test_set = synth::generate_dataset(spec);

  auto model = regnet::init_model(regnet::ArchConfig{}, 1);
  auto cfg = engine::TrainConfig::defaults(mode, 4);
  cfg.initial_lr = 1e-4;
  cfg.halve_after_epochs = 18;
  cfg.extra_epochs = 12;
  const auto t0 = Clock::now();
  const auto result = engine::train(model, train_set, cfg);
  TrainedEval e;
  e.seconds = seconds_since(t0);
  if (result.halted) std::fprintf(stderr, "training halted: %s\n", result.diagnostic.c_str());

  for (const auto& p : test_set.pairs) {
    const auto r = engine::register_pair(model, p.fixed, p.moving);
    const eval::PairAnnotations notes{&*p.fixed_mask, &*p.moving_mask, &*p.fixed_landmarks, &*p.moving_landmarks};
    const auto m = eval::evaluate_pair(p.id, r.field, notes);
    e.dist_before += *m.dist_before;
    e.dist_after += *m.dist_after;
    e.jacc_before += *m.jacc_before;
    e.jacc_after += *m.jacc_after;
    double epe = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        epe += std::hypot(r.field.dx(y, x) - p.truth->dx(y, x), r.field.dy(y, x) - p.truth->dy(y, x));
    e.epe += epe / 4096.0;
  }
  const double n = static_cast<double>(test_set.size());
  e.dist_before /= n;
  e.dist_after /= n;
  e.jacc_before /= n;
  e.jacc_after /= n;
  e.epe /= n;
  return e;
}

std::optional<TrainedEval> unsupervised_cache;

const TrainedEval& unsupervised_result() {
  if (!unsupervised_cache) unsupervised_cache = train_and_evaluate(engine::TrainMode::Unsupervised);
  return *unsupervised_cache;
}

Outcome unsupervised_training() {
  Outcome o;
  const auto& e = unsupervised_result();
  o.require(e.dist_after < 0.5 * e.dist_before, "Dist ratio");
  o.require(e.jacc_after > e.jacc_before, "Jaccard");
  o.require(e.seconds < 3600, "runtime");
  o.detail << "Dist " << e.dist_before << " -> " << e.dist_after << " px (" << e.dist_after / e.dist_before
           << "x), Jacc " << e.jacc_before << " -> " << e.jacc_after << ", EPE " << e.epe << " px, " << e.seconds
           << " s";
  return o;
}

Outcome supervised_parity() {
  Outcome o;
  const auto& un = unsupervised_result();
  const auto sup = train_and_evaluate(engine::TrainMode::SupervisedEPE);
  const double gain_un = un.dist_before - un.dist_after;
  const double gain_sup = sup.dist_before - sup.dist_after;
  const double ratio = gain_sup / gain_un;
  o.require(sup.epe < 1.0, "EPE");
  o.require(gain_un > 0 && ratio >= 0.5 && ratio <= 2.0, "Dist improvement parity");
  o.detail << "EPE " << sup.epe << " px, Dist " << sup.dist_before << " -> " << sup.dist_after
           << " px, improvement ratio supervised/unsupervised " << ratio << ", " << sup.seconds << " s";
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome unit_values() {
  Outcome o;
  nd::Tape t(false);
  using losses::Reduction;
  auto near = [](double a, double b, double tol = 1e-6) { return std::fabs(a - b) <= tol; };

  const nd::Tensor half = nd::Tensor::full({1, 1, 4, 4}, 0.5f), zero = nd::Tensor::zeros({1, 1, 4, 4});
  o.require(near(losses::photometric_loss(t, half, zero, Reduction::Sum).item(), 8.0), "photometric sum");
  o.require(near(losses::photometric_loss(t, half, zero, Reduction::MeanPerPixel).item(), 0.5), "photometric mean");

  std::vector<float> col(18, 0.0f);
  for (int i = 0; i < 9; ++i) col[i] = static_cast<float>(i % 3);
  const nd::Tensor colf = nd::Tensor::from_data({1, 2, 3, 3}, col);
  o.require(near(losses::smooth_n(t, colf).item(), 6.0), "smooth_n");
  o.require(near(losses::smooth_e(t, colf, nd::Tensor::full({1, 1, 3, 3}, 0.3f)).item(), 6.0), "smooth_e flat");
  std::vector<float> step_img(9, 0.0f), step_fld(18, 0.0f);
  for (int y = 0; y < 3; ++y) step_img[y * 3 + 2] = step_fld[y * 3 + 2] = 1.0f;
  o.require(near(losses::smooth_e(t, nd::Tensor::from_data({1, 2, 3, 3}, step_fld),
                                  nd::Tensor::from_data({1, 1, 3, 3}, step_img))
                     .item(),
                 3.0 * std::exp(-1.0)),
            "smooth_e step");

  std::vector<float> a(16), b(16);
  for (int i = 0; i < 16; ++i) b[i] = 1.0f - (a[i] = static_cast<float>(i % 2));
  o.require(near(losses::overlap_loss(t, nd::Tensor::from_data({1, 1, 4, 4}, a), nd::Tensor::from_data({1, 1, 4, 4}, b))
                     .item(),
                 16.0),
            "overlap");

  std::vector<float> e(32);
  for (int i = 0; i < 16; ++i) e[i] = 3, e[16 + i] = 4;
  o.require(near(losses::epe_loss(t, nd::Tensor::zeros({1, 2, 4, 4}), nd::Tensor::from_data({1, 2, 4, 4}, e)).item(),
                 5.0),
            "epe");

  SegMask ma(3, 3), mb(3, 3);
  for (int x = 0; x < 3; ++x) ma.set(0, x, true);
  ma.set(1, 0, true);
  mb.set(0, 1, true);
  mb.set(0, 2, true);
  mb.set(2, 1, true);
  mb.set(2, 2, true);
  o.require(near(eval::jaccard(ma, mb), 2.0 / 6.0, 1e-12), "jaccard");
  o.require(near(eval::landmark_distance(LandmarkSet{{{0, 3, 4}}}, LandmarkSet{{{0, 0, 0}}}), 5.0, 1e-12),
            "landmark 5");
  o.require(near(eval::landmark_distance(LandmarkSet{{{0, 3, 0}, {1, 0, 5}}}, LandmarkSet{{{0, 0, 0}, {1, 0, 0}}}), 4.0,
                 1e-12),
            "landmark mean");

  // Weighted objective with the default alpha = 1, beta = 0.05.
  const auto defaults = losses::LossConfig::defaults(1);
  o.require(defaults.alpha[0] == 1.0 && defaults.beta[0] == 0.05, "default weights");
  std::vector<float> f(32, 0.0f);
  for (int y = 0; y < 4; ++y) f[y * 4 + 3] = 0.5f;
  auto cfg = defaults;
  cfg.reduction = Reduction::Sum;
  const std::vector<losses::ScaleTerms> terms{{half, zero, nd::Tensor::from_data({1, 2, 4, 4}, f), {}, {}}};
  o.require(near(losses::total_loss(t, terms, cfg).total.item(), 8.1, 1e-5), "weighted total 8.1");
  o.detail << "13 values";
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome determinism_and_persistence() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("deformreg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  synth::SynthSpec spec;
  spec.pair_count = 8;
  spec.height = spec.width = 32;
  const auto data = synth::generate_dataset(spec);
  const regnet::ArchConfig arch{.levels = 3, .base_channels = 8, .height = 32, .width = 32};
  auto cfg = engine::TrainConfig::defaults(engine::TrainMode::Unsupervised, 3);
  cfg.initial_lr = 1e-3;
  cfg.batch_size = 3;
  cfg.halve_after_epochs = 2;
  cfg.extra_epochs = 1;
  std::vector<std::vector<std::uint8_t>> checkpoints;
  std::vector<std::vector<engine::EpochRecord>> histories;
  for (int run = 0; run < 2; ++run) {
    auto m = regnet::init_model(arch, 5);
    const auto r = engine::train(m, data, cfg);
    const auto blocks = r.adam.to_blocks(m.params);
    checkpoints.push_back(regnet::serialize(m, blocks));
    histories.push_back(r.history);
  }
  o.require(checkpoints[0] == checkpoints[1], "checkpoint bytes");
  bool same_history = histories[0].size() == histories[1].size();
  for (std::size_t i = 0; same_history && i < histories[0].size(); ++i) {
    const auto &a = histories[0][i], &b = histories[1][i];
    same_history = a.total == b.total && a.photometric == b.photometric && a.smooth == b.smooth && a.lr == b.lr;
  }
  o.require(same_history, "history");

  const auto& p = data.pairs[0];
  io::write_image((dir / "img.pgm").string(), p.fixed);
  const Image2D img = io::read_image((dir / "img.pgm").string());
  bool pgm_ok = img.height() == p.fixed.height();
  for (std::size_t i = 0; pgm_ok && i < img.size(); ++i)
    pgm_ok = std::fabs(img.pixels()[i] - p.fixed.pixels()[i]) <= 1.0 / 65535;
  o.require(pgm_ok, "PGM");
  io::write_mask((dir / "mask.pgm").string(), *p.fixed_mask);
  o.require(io::read_mask((dir / "mask.pgm").string()) == *p.fixed_mask, "mask");
  io::write_field((dir / "f.dff").string(), *p.truth);
  o.require(io::read_field((dir / "f.dff").string()) == *p.truth, "field");
  io::write_landmarks((dir / "l.csv").string(), *p.moving_landmarks);
  const auto lm = io::read_landmarks((dir / "l.csv").string());
  bool lm_ok = lm.size() == p.moving_landmarks->size();
  for (std::size_t i = 0; lm_ok && i < lm.size(); ++i)
    lm_ok = lm.points[i].x == p.moving_landmarks->points[i].x && lm.points[i].y == p.moving_landmarks->points[i].y;
  o.require(lm_ok, "landmarks");
  io::write_file((dir / "m.drg").string(), checkpoints[0]);
  const auto loaded = regnet::load_model((dir / "m.drg").string());
  o.require(regnet::serialize(loaded.model, loaded.extra) == checkpoints[0], "model");
  const auto adam = engine::AdamState::from_blocks(loaded.extra, loaded.model.params);
  o.require(adam && adam->step_count == 9, "Adam state");
  fs::remove_all(dir);
  o.detail << "2 training runs, 6 formats";
  return o;
}

// ---------------------------------------------------------------- criterion 8

Outcome speed() {
  Outcome o;
  synth::SynthSpec spec;
  spec.height = spec.width = 256;
  spec.max_displacement = 6;
  spec.pair_count = 1;
  const auto p = synth::generate_pair(spec, 0);
  const auto model = regnet::init_model(regnet::ArchConfig{.height = 256, .width = 256}, 1);
  engine::register_pair(model, p.fixed, p.moving);  // warm-up
  double reg = 1e9;
  for (int i = 0; i < 3; ++i) {
    const auto t0 = Clock::now();
    engine::register_pair(model, p.fixed, p.moving);
    reg = std::min(reg, seconds_since(t0));
  }
  const auto t0 = Clock::now();
  engine::optimize_field(p.fixed, p.moving, engine::OptimizeConfig{});
  const double opt = seconds_since(t0);
  o.require(reg < 1.0, "register");
  o.require(opt < 120.0, "optimize");
  o.detail << "register " << reg << " s, optimize " << opt << " s (" << opt / reg << "x)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
      {"gradient integrity", gradient_integrity},
      {"identity suite", identity_suite},
      {"synthetic recovery, direct optimizer", direct_optimizer},
      {"synthetic recovery, unsupervised training", unsupervised_training},
      {"supervised baseline parity", supervised_parity},
      {"loss and metric unit values", unit_values},
      {"determinism and persistence", determinism_and_persistence},
      {"speed sanity", speed},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " exception: " << e.what();
    }
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %d %s: %s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
